//! Statistics shared by the acceptance suite.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided Student-t confidence interval for the mean of `samples`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
}

impl Interval {
    /// Needs at least two samples.
    pub fn t(samples: &[f64], level: f64) -> Self {
        let n = samples.len();
        assert!(n >= 2, "a confidence interval needs two samples, got {n}");
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let t = StudentsT::new(0.0, 1.0, nf - 1.0).expect("positive degrees of freedom");
        let q = t.inverse_cdf(0.5 + 0.5 * level);
        Self {
            mean,
            half_width: q * (var / nf).sqrt(),
        }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.half_width)
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_interval_uses_the_student_quantile() {
        // df = 4: t_{0.975} = 2.776445
        let ci = Interval::t(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.95);
        assert_eq!(ci.mean, 3.0);
        let se = (2.5f64 / 5.0).sqrt();
        assert!((ci.half_width - 2.776445 * se).abs() < 1e-5);
    }

    #[test]
    fn overlap_is_symmetric() {
        let a = Interval { mean: 0.0, half_width: 1.0 };
        let b = Interval { mean: 1.5, half_width: 0.6 };
        let c = Interval { mean: 3.0, half_width: 0.5 };
        assert!(a.overlaps(&b) && b.overlaps(&a));
        assert!(!a.overlaps(&c) && !c.overlaps(&a));
    }

    #[test]
    fn slope_of_a_line() {
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-12);
    }
}
