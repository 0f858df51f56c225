//! Learnable functions and the library that shares them across tasks.

mod function;
mod library;

pub use function::{InputSpec, NeuralFunction, NeuralFunctionSpec, OutputSpec};
pub use library::{Library, LibraryPerception, LIBRARY_VERSION};
