use statrs::function::gamma::ln_gamma;

/// `ln n!` from a precomputed table, falling back to `ln Γ(n+1)` past it.
#[derive(Clone, Debug)]
pub struct LogFactorial {
    table: Vec<f64>,
}

impl LogFactorial {
    pub fn new(max: u64) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        let mut acc = 0.0f64;
        table.push(0.0);
        for n in 1..=max {
            acc += (n as f64).ln();
            table.push(acc);
        }
        LogFactorial { table }
    }

    #[inline]
    pub fn get(&self, n: u64) -> f64 {
        match self.table.get(n as usize) {
            Some(&v) => v,
            None => ln_gamma(n as f64 + 1.0),
        }
    }

    /// `−Σ ln x_ij!`, the log of the unnormalized conditional mass.
    pub fn log_weight(&self, counts: &[u64]) -> f64 {
        -counts.iter().map(|&x| self.get(x)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_and_fallback_agree() {
        let small = LogFactorial::new(10);
        let big = LogFactorial::new(200);
        assert_eq!(small.get(0), 0.0);
        assert!((small.get(5) - 120f64.ln()).abs() < 1e-12);
        for n in [11, 50, 150] {
            assert!((small.get(n) - big.get(n)).abs() < 1e-9 * big.get(n));
        }
    }
}
