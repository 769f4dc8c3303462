//! One module per subcommand plus the helpers they share.

pub mod fit;
pub mod kspa;
pub mod reproduce;
pub mod select;
pub mod simulate;

use volterra::selection::KernelFamily;
use volterra::KernelSpec;

use crate::error::{CliError, CliResult};

/// Resolves the `--kernel` name plus order/width flags into a concrete
/// kernel.
pub fn build_kernel(
    name: &str,
    order: Option<usize>,
    sigma: Option<f64>,
) -> CliResult<KernelSpec> {
    match name {
        "sum" => {
            let order = order
                .ok_or_else(|| CliError::config("the sum kernel needs --order"))?;
            Ok(KernelSpec::sum_polynomial(order))
        }
        "inhomogeneous" => {
            let order = order
                .ok_or_else(|| CliError::config("the inhomogeneous kernel needs --order"))?;
            Ok(KernelSpec::inhomogeneous_polynomial(order))
        }
        "exponential" => Ok(KernelSpec::exponential()),
        "gaussian" => {
            let sigma = sigma
                .ok_or_else(|| CliError::config("the gaussian kernel needs --sigma"))?;
            Ok(KernelSpec::gaussian(sigma)?)
        }
        other => Err(CliError::config(format!(
            "unknown kernel {other:?}; expected sum, inhomogeneous, exponential or gaussian"
        ))),
    }
}

/// Resolves the `--kernel` name into a cross-validation family.
pub fn build_family(name: &str) -> CliResult<KernelFamily> {
    match name {
        "sum" => Ok(KernelFamily::SumPolynomial),
        "inhomogeneous" => Ok(KernelFamily::InhomogeneousPolynomial),
        "exponential" => Ok(KernelFamily::Exponential),
        "gaussian" => Ok(KernelFamily::Gaussian),
        other => Err(CliError::config(format!(
            "unknown kernel {other:?}; expected sum, inhomogeneous, exponential or gaussian"
        ))),
    }
}

/// Resolves `--transform`.
pub fn build_transform(name: &str) -> CliResult<volterra::kspa::ErrorTransform> {
    match name {
        "abs" => Ok(volterra::kspa::ErrorTransform::Absolute),
        "sq" => Ok(volterra::kspa::ErrorTransform::Squared),
        other => Err(CliError::config(format!(
            "unknown transform {other:?}; expected abs or sq"
        ))),
    }
}
