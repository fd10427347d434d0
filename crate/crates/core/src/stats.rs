/// Mean and (population) standard deviation of a sample of returns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnStat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl ReturnStat {
    /// Panics on an empty sample; every caller has at least one episode.
    pub fn from_samples(xs: &[f64]) -> Self {
        assert!(!xs.is_empty(), "ReturnStat needs at least one sample");
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        ReturnStat {
            mean,
            std: var.sqrt(),
            n,
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n > 1 {
            self.std * (self.n as f64 / (self.n as f64 - 1.0)).sqrt() / (self.n as f64).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_stats() {
        let s = ReturnStat::from_samples(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
