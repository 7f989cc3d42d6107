//! Shape classification of polygon geometries.
//!
//! Polygons are turned into one of two representations:
//!
//! * elliptic Fourier feature vectors ([`efd`]) consumed by the shallow
//!   learners in [`shallow`] (k-NN, logistic regression, CART, RBF-SVM);
//! * normalized vertex-vector sequences ([`encoding`]) consumed by the 1D
//!   convolutional and bidirectional LSTM classifiers in [`models`], built on
//!   the small differentiable layer set in [`neural`].
//!
//! [`harness`] provides splits, metrics, cross-validated grid search and
//! result tables, and [`datagen`] produces deterministic synthetic tasks.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parsers and
//! the command line live in the `geomclass` crate.
#![no_std]

extern crate alloc;

pub mod datagen;
pub mod efd;
pub mod encoding;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod matrix;
pub mod models;
pub mod neural;
pub mod shallow;

pub use geometry::{Geometry, GeometryError, GeometryStats, Point, Ring};
