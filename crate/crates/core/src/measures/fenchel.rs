//! Brute-force Fenchel machinery on grids, used to cross-check the
//! closed-form dual steps.

use super::link::ConcaveLink;

fn grid(step: f64, hi: f64) -> Vec<f64> {
    let n = (hi / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step).min(hi)).collect()
}

/// `Ψ*(α, β) = inf over (u, v) in [0,1]² of α u + β v - Ψ(u, v)`,
/// evaluated on a grid of spacing `grid_step`.
pub fn fenchel_conjugate_value(link: &ConcaveLink, alpha: f64, beta: f64, grid_step: f64) -> f64 {
    let g = grid(grid_step, 1.0);
    let mut best = f64::INFINITY;
    for &u in &g {
        for &v in &g {
            best = best.min(alpha * u + beta * v - link.value_unchecked(u, v));
        }
    }
    best
}

/// Grid of `Ψ*` over dual points `(α, β)` in `[0, 1]²`, reusable across
/// many primal points.
#[derive(Debug, Clone)]
pub struct DualObjectiveTable {
    duals: Vec<f64>,
    conj: Vec<f64>,
    primal_step: f64,
    link: ConcaveLink,
}

impl DualObjectiveTable {
    pub fn new(link: &ConcaveLink, grid_step: f64) -> Self {
        assert!(grid_step > 0.0 && grid_step <= 0.1, "grid step must lie in (0, 0.1]");
        let duals = grid(grid_step, 1.0);
        let primal = grid(grid_step, 1.0);
        let psi: Vec<f64> = primal
            .iter()
            .flat_map(|&u| primal.iter().map(move |&v| (u, v)))
            .map(|(u, v)| link.value_unchecked(u, v))
            .collect();
        let m = primal.len();
        let mut conj = Vec::with_capacity(duals.len() * duals.len());
        for &a in &duals {
            for &b in &duals {
                let mut best = f64::INFINITY;
                for (i, &u) in primal.iter().enumerate() {
                    let au = a * u;
                    for (j, &v) in primal.iter().enumerate() {
                        best = best.min(au + b * v - psi[i * m + j]);
                    }
                }
                conj.push(best);
            }
        }
        Self {
            duals,
            conj,
            primal_step: grid_step,
            link: *link,
        }
    }

    /// `α u + β v - Ψ*(α, β)` with `Ψ*` from the grid; dual points off the
    /// grid get their conjugate by direct grid search.
    pub fn objective(&self, u: f64, v: f64, alpha: f64, beta: f64) -> f64 {
        let conj = self.lookup(alpha, beta).unwrap_or_else(|| {
            fenchel_conjugate_value(&self.link, alpha, beta, self.primal_step)
        });
        alpha * u + beta * v - conj
    }

    fn lookup(&self, alpha: f64, beta: f64) -> Option<f64> {
        let pos = |x: f64| self.duals.iter().position(|&g| g == x);
        Some(self.conj[pos(alpha)? * self.duals.len() + pos(beta)?])
    }

    /// Grid argmin `(α, β, objective)`; ties keep the first grid point.
    pub fn argmin(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let k = self.duals.len();
        let mut best = (0.0, 0.0, f64::INFINITY);
        for (i, &a) in self.duals.iter().enumerate() {
            for (j, &b) in self.duals.iter().enumerate() {
                let obj = a * u + b * v - self.conj[i * k + j];
                if obj < best.2 {
                    best = (a, b, obj);
                }
            }
        }
        best
    }
}

/// Brute-force dual step: grid argmin over `(α, β)` in `[0, 1]²` of
/// `α u + β v - Ψ*(α, β)`, with `Ψ*` itself grid-evaluated.
pub fn fenchel_oracle(link: &ConcaveLink, u: f64, v: f64, grid_step: f64) -> (f64, f64) {
    let (a, b, _) = DualObjectiveTable::new(link, grid_step).argmin(u, v);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn conjugate_values() {
        let min = ConcaveLink::min_tpr_tnr();
        assert_abs_diff_eq!(fenchel_conjugate_value(&min, 1.0, 0.0, 0.01), 0.0, epsilon = 1e-12);
        for a in [0.0, 0.25, 0.6, 1.0] {
            assert_abs_diff_eq!(fenchel_conjugate_value(&min, a, 1.0 - a, 0.01), 0.0, epsilon = 1e-12);
        }
        let q = ConcaveLink::q_mean();
        assert_abs_diff_eq!(fenchel_conjugate_value(&q, 0.0, 0.0, 0.01), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_fixtures() {
        let (a, b) = fenchel_oracle(&ConcaveLink::min_tpr_tnr(), 0.2, 0.8, 0.05);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-9);

        let table = DualObjectiveTable::new(&ConcaveLink::q_mean(), 0.05);
        let (a, b, _) = table.argmin(0.5, 0.5);
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn closed_form_matches_oracle_objective() {
        for link in [ConcaveLink::min_tpr_tnr(), ConcaveLink::q_mean()] {
            let table = DualObjectiveTable::new(&link, 0.05);
            for (u, v) in [(0.4, 0.6), (0.2, 0.9), (0.75, 0.75), (1.0, 0.0), (0.95, 1.0)] {
                let (a, b) = link.dual_step(u, v).unwrap();
                let closed = table.objective(u, v, a, b);
                let (_, _, oracle) = table.argmin(u, v);
                assert!(oracle >= closed - 1e-3, "{:?} ({u},{v}): {oracle} < {closed}", link.kind);
            }
        }
    }
}
