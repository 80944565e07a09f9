//! Named kernels and imported scaling-exponent constants.
//!
//! The scaling exponents are external imports from the literature, not
//! values this tool derives; every preset therefore carries its citation,
//! and the pipelines copy that citation into output metadata.

use std::path::Path;
use std::sync::Arc;

use polarforge_core::{Field, Kernel};

use crate::error::CliError;

/// A bundled (kernel, μ*, citation) configuration.
#[derive(Debug, Clone, Copy)]
pub struct MuPreset {
    pub name: &'static str,
    /// Name of the bundled kernel preset.
    pub kernel: &'static str,
    pub mu_star: f64,
    pub citation: &'static str,
    /// Companion constant for the comparison curve drawn next to this
    /// preset's region.
    pub reference_mu: f64,
    pub reference_citation: &'static str,
}

pub const MU_PRESETS: &[MuPreset] = &[
    MuPreset {
        name: "arikan-bec",
        kernel: "arikan",
        mu_star: 3.627,
        citation: "mu* = 3.627 (BEC, Arikan kernel): Fazeli & Vardy, Allerton 2014",
        reference_mu: 4.627,
        reference_citation: "reference mu = 4.627: Mondelli, Hassani & Urbanke, \
                             IEEE Trans. Inf. Theory 62(12), 2016",
    },
    MuPreset {
        name: "arikan-bdmc",
        kernel: "arikan",
        mu_star: 4.714,
        citation: "mu* = 4.714 (BDMC/AWGN, Arikan kernel): Mondelli, Hassani & Urbanke, \
                   IEEE Trans. Inf. Theory 62(12), 2016; Fong & Tan, Entropy 19(7), 2017",
        reference_mu: 5.714,
        reference_citation: "reference mu = 5.714: Fong & Tan, Entropy 19(7), 2017",
    },
];

/// Look up a μ* preset by name.
pub fn mu_preset(name: &str) -> Option<&'static MuPreset> {
    MU_PRESETS.iter().find(|p| p.name == name)
}

/// Build a kernel preset by name: `arikan`, or `rs<q>` for the
/// Reed-Solomon kernel over GF(q), q a prime power up to 16.
pub fn kernel_preset(name: &str) -> Option<Kernel> {
    match name {
        "arikan" => Some(Kernel::arikan()),
        _ => {
            let q: u64 = name.strip_prefix("rs")?.parse().ok()?;
            if q > 16 {
                return None;
            }
            let field = Arc::new(Field::of_order(q).ok()?);
            Some(Kernel::reed_solomon(field))
        }
    }
}

/// Resolve a kernel argument: an existing file wins, otherwise a preset
/// name. Relative paths are taken against `base`.
pub fn resolve_kernel(spec: &str, base: &Path) -> Result<Arc<Kernel>, CliError> {
    let path = if Path::new(spec).is_absolute() {
        Path::new(spec).to_path_buf()
    } else {
        base.join(spec)
    };
    if path.is_file() {
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        return Ok(Arc::new(Kernel::parse_str(&text)?));
    }
    match kernel_preset(spec) {
        Some(k) => Ok(Arc::new(k)),
        None => Err(CliError::Invalid(format!(
            "kernel '{spec}': no such file and no such preset \
             (presets: arikan, rs2, rs4, rs8, rs16)"
        ))),
    }
}

/// Parse a μ* argument: a number, or a preset name whose constant (and
/// citation) is used.
pub fn resolve_mu_star(spec: &str) -> Result<(f64, Option<&'static MuPreset>), CliError> {
    if let Ok(v) = spec.parse::<f64>() {
        if v <= 1.0 || v.is_nan() {
            return Err(CliError::Invalid(format!("mu* must exceed 1, got {spec}")));
        }
        return Ok((v, None));
    }
    match mu_preset(spec) {
        Some(p) => Ok((p.mu_star, Some(p))),
        None => Err(CliError::Invalid(format!(
            "mu* '{spec}' is neither a number nor a preset \
             (presets: arikan-bec, arikan-bdmc)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_presets_resolve() {
        assert_eq!(kernel_preset("arikan").unwrap().ell(), 2);
        assert_eq!(kernel_preset("rs4").unwrap().ell(), 4);
        assert_eq!(kernel_preset("rs16").unwrap().ell(), 16);
        assert!(kernel_preset("rs32").is_none());
        assert!(kernel_preset("nope").is_none());
    }

    #[test]
    fn mu_presets_carry_citations() {
        let p = mu_preset("arikan-bec").unwrap();
        assert!((p.mu_star - 3.627).abs() < 1e-12);
        assert!((p.reference_mu - 4.627).abs() < 1e-12);
        assert!(p.citation.contains("Fazeli"));
        let p = mu_preset("arikan-bdmc").unwrap();
        assert!((p.mu_star - 4.714).abs() < 1e-12);
        assert!(p.citation.contains("Mondelli") && p.citation.contains("Fong"));
    }

    #[test]
    fn mu_star_argument_forms() {
        assert_eq!(resolve_mu_star("3.627").unwrap().0, 3.627);
        assert!(resolve_mu_star("arikan-bec").unwrap().1.is_some());
        assert!(resolve_mu_star("0.5").is_err());
        assert!(resolve_mu_star("bogus").is_err());
    }
}
