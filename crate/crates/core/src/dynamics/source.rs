use super::{ProblemSpec, Result, SourceKind};
use crate::geometry::{pow_nonneg, Domain, Field};

/// `g(u, |grad u|)` at every node; zero at inactive nodes.
pub fn evaluate_source(u: &Field, spec: &ProblemSpec, domain: &Domain) -> Result<Field> {
    let mut out = vec![0.0; domain.len()];
    source_into(&u.values, spec, domain, &mut out)?;
    Ok(Field::new(out, u.time))
}

pub(crate) fn source_into(u: &[f64], spec: &ProblemSpec, domain: &Domain, out: &mut [f64]) -> Result<()> {
    match spec.source {
        SourceKind::None => out.iter_mut().for_each(|g| *g = 0.0),
        SourceKind::PowerAbsorption => {
            for (i, g) in out.iter_mut().enumerate() {
                *g = if domain.is_active(i) {
                    spec.k1 * pow_nonneg(u[i], spec.p) - spec.k2 * pow_nonneg(u[i], spec.q)
                } else {
                    0.0
                };
            }
        }
        SourceKind::GradientAbsorption => {
            let grad2 = domain.gradient_norm_sq(u)?;
            for (i, g) in out.iter_mut().enumerate() {
                *g = if domain.is_active(i) {
                    spec.k1 * pow_nonneg(u[i], spec.p) - spec.k2 * pow_nonneg(grad2[i], spec.q / 2.0)
                } else {
                    0.0
                };
            }
        }
    }
    Ok(())
}
