use super::Real;
use crate::error::{Error, Result};

/// Clamp applied to reconstruction probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Summed element-wise binary cross-entropy.
pub fn bce<T: Real>(reconstruction: &[T], target: &[T]) -> Result<f64> {
    if reconstruction.len() != target.len() {
        return Err(Error::Shape(format!(
            "reconstruction has {} entries, target {}",
            reconstruction.len(),
            target.len()
        )));
    }
    let mut sum = 0.0f64;
    for (&p, &t) in reconstruction.iter().zip(target) {
        let p = p.to_f64().unwrap();
        if !p.is_finite() {
            return Err(Error::Numerical(format!("reconstruction entry {p} is not finite")));
        }
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let t = t.to_f64().unwrap();
        sum -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    Ok(sum)
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal, summed
/// over dimensions: `0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)`.
pub fn kl_divergence<T: Real>(mu: &[T], logvar: &[T]) -> Result<f64> {
    if mu.len() != logvar.len() {
        return Err(Error::Shape(format!("mu has {} entries, logvar {}", mu.len(), logvar.len())));
    }
    Ok(mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| {
            let (m, lv) = (m.to_f64().unwrap(), lv.to_f64().unwrap());
            0.5 * (lv.exp() + m * m - 1.0 - lv)
        })
        .sum())
}

/// Reconstruction term, KL term, and `recon + kl_weight * kl`.
pub fn vae_loss<T: Real>(reconstruction: &[T], target: &[T], mu: &[T], logvar: &[T], kl_weight: f64) -> Result<VaeLoss> {
    let recon = bce(reconstruction, target)?;
    let kl = kl_divergence(mu, logvar)?;
    Ok(VaeLoss { total: recon + kl_weight * kl, recon, kl })
}

/// `z = mu + exp(0.5 * logvar) * noise`.
pub fn reparameterize<T: Real>(mu: &[T], logvar: &[T], noise: &[T]) -> Result<Vec<T>> {
    if mu.len() != logvar.len() || mu.len() != noise.len() {
        return Err(Error::Shape("reparameterize needs equal-length mu, logvar, noise".into()));
    }
    let half = T::from_f64(0.5).unwrap();
    Ok(mu.iter().zip(logvar).zip(noise).map(|((&m, &lv), &n)| m + (half * lv).exp() * n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_is_zero_at_prior() {
        assert_eq!(kl_divergence(&[0.0f64; 8], &[0.0f64; 8]).unwrap(), 0.0);
    }

    #[test]
    fn kl_scalar_unit_mean_is_half() {
        assert!((kl_divergence(&[1.0f64], &[0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_kl_weight_gives_reconstruction_only() {
        let p = [0.2f64, 0.7, 0.9];
        let t = [0.0, 1.0, 1.0];
        let l = vae_loss(&p, &t, &[3.0], &[-1.0], 0.0).unwrap();
        assert_eq!(l.total, l.recon);
        assert!(l.kl > 0.0);
    }

    #[test]
    fn bce_zero_only_at_target_under_clamp() {
        let t = [0.0f64, 1.0, 1.0, 0.0];
        let exact = bce(&t, &t).unwrap();
        assert!(exact < 1e-6 * 4.0, "{exact}");
        assert!(bce(&[0.1, 0.9, 0.9, 0.1], &t).unwrap() > exact);
    }

    #[test]
    fn bce_rejects_nan() {
        assert!(matches!(bce(&[f32::NAN], &[1.0]), Err(Error::Numerical(_))));
    }

    #[test]
    fn reparameterize_examples() {
        assert_eq!(reparameterize(&[1.0f64, -2.0], &[0.3, 0.1], &[0.0, 0.0]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(reparameterize(&[1.0f64], &[0.0], &[0.5]).unwrap(), vec![1.5]);
        let z = reparameterize(&[0.0f64], &[2.0 * 3.0f64.ln()], &[1.0]).unwrap();
        assert!((z[0] - 3.0).abs() < 1e-12);
    }
}
