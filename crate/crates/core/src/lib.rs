pub mod cli;
pub mod codegen;
pub mod fixtures;
pub mod interpreter;
pub mod model_ir;
pub mod parser;
pub mod quantizer;
pub mod tensor;
