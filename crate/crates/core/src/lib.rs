pub mod ansatz;
pub mod cli;
pub mod flops;
pub mod numeric;
pub mod oracle;
pub mod pauli;
pub mod sampler;
pub mod scaling;
pub mod vmc;
