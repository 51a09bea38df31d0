//! Concrete experiment models.

pub mod analytic;
pub mod bed;
pub mod cancer;
pub mod iwae;
pub mod triple;

pub use analytic::AnalyticModel;
pub use bed::{
    bed_naive_eig, bed_reformulated_eig, dd_response_prob, BedNaiveProblem, ConstantResponse, DDParams,
    DelayDiscounting, DesignPoint, ReformulatedEig, ResponseModel,
};
pub use cancer::{simulate_tumor, CancerModel, CancerParams};
pub use iwae::{iwae_objective, IwaeProblem};
pub use triple::TripleModel;
