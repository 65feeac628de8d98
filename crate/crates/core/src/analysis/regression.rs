//! Least-squares helpers.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination. A perfect fit of constant data counts as 1.
    pub r_squared: f64,
    /// Standard error of the slope; zero when only two points are fitted.
    pub slope_stderr: f64,
}

/// Ordinary least squares `y = intercept + slope·x`. `None` for fewer than two
/// points or when every `x` is the same.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let slope_stderr = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(LinearFit { slope, intercept, r_squared, slope_stderr })
}

/// Weighted linear least squares: minimises `Σ w_i (y_i − rows_i·β)²` through
/// the normal equations. Returns `None` when the system is singular.
pub fn weighted_least_squares<const P: usize>(rows: &[[f64; P]], ys: &[f64], weights: &[f64]) -> Option<[f64; P]> {
    let mut ata = [[0.0; P]; P];
    let mut aty = [0.0; P];
    for ((row, &y), &w) in rows.iter().zip(ys).zip(weights) {
        for i in 0..P {
            aty[i] += w * row[i] * y;
            for j in 0..P {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    solve(ata, aty)
}

/// Gaussian elimination with partial pivoting.
fn solve<const P: usize>(mut a: [[f64; P]; P], mut b: [f64; P]) -> Option<[f64; P]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..P {
        let pivot = (col..P).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..P {
            let f = a[row][col] / a[col][col];
            for k in col..P {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; P];
    for row in (0..P).rev() {
        let mut s = b[row];
        for k in row + 1..P {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-7);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
        let flat = linear_fit(&[0.0, 1.0, 2.0], &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert_eq!(flat.r_squared, 1.0);
    }

    #[test]
    fn known_r_squared() {
        // y = x + e with e = (+1, −1, −1, +1): slope 1, R² = 1 − 4/9
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 0.0, 1.0, 4.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        assert!((f.r_squared - (1.0 - 4.0 / 9.0)).abs() < 1e-14, "{}", f.r_squared);
    }

    #[test]
    fn three_parameter_solve() {
        let rows: Vec<[f64; 3]> = (0..10)
            .map(|i| {
                let x = i as f64;
                [1.0, x, x * x]
            })
            .collect();
        let ys: Vec<f64> = rows.iter().map(|r| 0.5 - 2.0 * r[1] + 0.25 * r[2]).collect();
        let w = vec![1.0; rows.len()];
        let beta = weighted_least_squares(&rows, &ys, &w).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-10);
        assert!((beta[1] + 2.0).abs() < 1e-10);
        assert!((beta[2] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn singular_system() {
        let rows = vec![[1.0, 2.0]; 5];
        assert!(weighted_least_squares(&rows, &[1.0; 5], &[1.0; 5]).is_none());
    }
}
