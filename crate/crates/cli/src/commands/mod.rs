pub mod ceiling;
pub mod contrast;
pub mod fit;
pub mod report;
pub mod residual;
pub mod synth;
