//! Euclidean projection onto the probability simplex.

/// Closest point of `{x >= 0, sum(x) = 1}` to `v`.
pub fn project(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out, &mut Vec::with_capacity(v.len()));
    out
}

/// In-place [`project`] using `scratch` for the sort.
pub fn project_in_place(v: &mut [f64], scratch: &mut Vec<f64>) {
    if v.is_empty() {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}
