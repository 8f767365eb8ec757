use super::params::ParamStore;
use super::tape::{AutodiffError, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coordinates: usize,
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Compares tape gradients against central differences
/// `(f(p + eps) - f(p - eps)) / (2 eps)` on every coordinate of every
/// parameter in `params`.
///
/// `build` must rebuild the same scalar from the given parameters each time.
/// Inputs sitting exactly on a kink of a piecewise-linear activation (PReLU,
/// LeakyReLU at 0) are outside the contract: the tape returns one one-sided
/// derivative while the central difference averages both sides.
pub fn grad_check<F>(build: F, params: &ParamStore, eps: f64) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var), AutodiffError>,
{
    grad_check_subset(build, params, eps, |_| true)
}

/// [`grad_check`] restricted to parameters whose name satisfies `include`.
pub fn grad_check_subset<F>(
    build: F,
    params: &ParamStore,
    eps: f64,
    include: impl Fn(&str) -> bool,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var), AutodiffError>,
{
    let eval = |p: &ParamStore| -> Result<f64, AutodiffError> {
        let (tape, out) = build(p)?;
        Ok(tape.scalar(out))
    };

    let (tape, out) = build(params)?;
    let base = tape.scalar(out);
    let again = eval(params)?;
    if base.to_bits() != again.to_bits() {
        return Err(AutodiffError::NonDeterministic(base, again));
    }
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        coordinates: 0,
    };
    let mut probe = params.clone();
    for (name, value) in params.iter().filter(|(n, _)| include(n)) {
        let analytic = grads.get(name).cloned().unwrap_or_else(|| value.mapv(|_| 0.0));
        for (idx, (&orig, &a)) in value.iter().zip(analytic.iter()).enumerate() {
            set(&mut probe, name, idx, orig + eps);
            let plus = eval(&probe)?;
            set(&mut probe, name, idx, orig - eps);
            let minus = eval(&probe)?;
            set(&mut probe, name, idx, orig);
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if report.worst_param.is_empty() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = name.to_string();
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}

fn set(store: &mut ParamStore, name: &str, idx: usize, value: f64) {
    let m = store.get_mut(name).expect("probe mirrors params");
    *m.iter_mut().nth(idx).expect("index within parameter") = value;
}
