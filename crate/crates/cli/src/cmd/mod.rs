pub mod asym;
pub mod circuit;
pub mod cool;
pub mod disorder;
pub mod fit;
pub mod modeshape;
pub mod omit;
