pub mod ir;
pub mod solver;
pub mod costnorm;
pub mod modsched;
pub mod sim;
pub mod joint;
pub mod straightline;
pub mod codegen;
pub mod viz;
pub mod cli;
