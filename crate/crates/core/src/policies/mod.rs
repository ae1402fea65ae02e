//! Feedback controllers: the trained Markov update rule and the Bayesian
//! filter.

pub mod bayes;
pub mod markov;

pub use bayes::{bayes_init, BayesState, SharpnessPolynomial};
pub use markov::{markov_next_phase, MarkovPolicy, TrainingInfo};
