use crate::error::{Error, Result};
use crate::numcore::{GradStore, ParamId, ParamStore};

/// Worst central-difference disagreement found inside one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub scalars: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err < self.tolerance)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| p.max_rel_err >= self.tolerance)
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against `(loss(θ+ε) − loss(θ−ε)) / 2ε` for every
/// scalar of every parameter in `store`.
pub fn finite_diff_check(
    store: &mut ParamStore,
    analytic: &GradStore,
    loss: impl FnMut(&ParamStore) -> Result<f64>,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let ids: Vec<ParamId> = store.ids().collect();
    finite_diff_check_subset(store, analytic, &ids, loss, epsilon, tolerance)
}

/// As [`finite_diff_check`], restricted to the listed parameters.
pub fn finite_diff_check_subset(
    store: &mut ParamStore,
    analytic: &GradStore,
    ids: &[ParamId],
    mut loss: impl FnMut(&ParamStore) -> Result<f64>,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-4).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon {epsilon} outside [1e-7, 1e-4]")));
    }
    let first = loss(store)?;
    let second = loss(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut params = Vec::with_capacity(ids.len());
    for &id in ids {
        let n = store.get(id).numel();
        let mut check = ParamCheck {
            name: store.name(id).to_string(),
            scalars: n,
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..n {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + epsilon;
            let plus = loss(store);
            store.get_mut(id).data_mut()[i] = orig - epsilon;
            let minus = loss(store);
            store.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * epsilon);
            let a = analytic.get(id)[i];
            let err = relative_error(a, numeric);
            if err > check.max_rel_err || i == 0 {
                check.max_rel_err = err;
                check.worst_index = i;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    Ok(GradCheckReport { epsilon, tolerance, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor;

    #[test]
    fn quadratic_matches() {
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::scalar(3.0)).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id)[0] = 6.0;
        let report = finite_diff_check(
            &mut store,
            &grads,
            |s| Ok(s.get(id).data()[0].powi(2)),
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.params[0].max_rel_err < 1e-9, "{report:?}");
        assert!((report.params[0].numeric - 6.0).abs() < 1e-8);
        assert_eq!(store.get(id).data(), &[3.0]);
    }

    #[test]
    fn dead_parameter_has_zero_error() {
        let mut store = ParamStore::new();
        store.add("used", Tensor::scalar(1.0)).unwrap();
        store.add("unused", Tensor::row(&[4.0, -2.0])).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(ParamId(0))[0] = 2.0;
        let report =
            finite_diff_check(&mut store, &grads, |s| Ok(2.0 * s.get(ParamId(0)).data()[0]), 1e-5, 1e-4)
                .unwrap();
        assert_eq!(report.params[1].max_rel_err, 0.0);
        assert_eq!(report.params[1].numeric, 0.0);
        assert!(report.passed());
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::scalar(3.0)).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id)[0] = 5.0;
        let report =
            finite_diff_check(&mut store, &grads, |s| Ok(s.get(id).data()[0].powi(2)), 1e-5, 1e-4)
                .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn nondeterministic_closure_is_rejected() {
        let mut store = ParamStore::new();
        store.add("theta", Tensor::scalar(0.0)).unwrap();
        let grads = GradStore::zeros_like(&store);
        let mut calls = 0.0;
        let err = finite_diff_check(
            &mut store,
            &grads,
            |_| {
                calls += 1.0;
                Ok(calls)
            },
            1e-5,
            1e-4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }

    #[test]
    fn epsilon_range_enforced() {
        let mut store = ParamStore::new();
        let grads = GradStore::zeros_like(&store);
        assert!(finite_diff_check(&mut store, &grads, |_| Ok(0.0), 1e-3, 1e-4).is_err());
        assert!(finite_diff_check(&mut store, &grads, |_| Ok(0.0), 1e-8, 1e-4).is_err());
    }
}
