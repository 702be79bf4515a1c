//! Differentiable forward maps of the adversarial pair.

pub mod critic;
pub mod generator;

pub use critic::{build_critic_forward, critic_forward, CriticConfig, CriticLeaves, CriticParams};
pub use generator::{
    build_attention, build_generator_forward, build_tcn, generator_forward, positional_encoding,
    sample_noise, GeneratorConfig, GeneratorLeaves, GeneratorParams, NoiseSample,
};
