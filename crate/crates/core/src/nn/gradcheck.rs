//! Central-difference gradient checking.

use super::params::{GradStore, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Max over coordinates of `|analytic − numeric| / max(1, |analytic|)`
/// for a scalar function of one tensor.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let coords: Vec<usize> = (0..x.len()).collect();
    grad_check_coords(&f, x, eps, &coords)
}

/// Same as [`grad_check`] restricted to the listed coordinates.
pub fn grad_check_coords<F>(f: &F, x: &Tensor, eps: f64, coords: &[usize]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let xv = tape.input(x.clone());
    let y = f(&tape, xv)?;
    check_finite(y.item())?;
    let grads = tape.backward(y)?;
    let analytic = grads
        .wrt(xv)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape()));

    let eval = |t: Tensor| -> Result<f64> {
        let tape = Tape::new();
        let v = tape.constant(t);
        let y = f(&tape, v)?.item();
        check_finite(y)?;
        Ok(y)
    };
    let mut worst = 0.0f64;
    for &i in coords {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

/// Compares an analytic parameter gradient against central differences of
/// `f` at the listed `(parameter, flat index)` coordinates.
pub fn grad_check_params<F>(
    f: F,
    store: &ParamStore,
    analytic: &GradStore,
    eps: f64,
    coords: &[(ParamId, usize)],
) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<f64>,
{
    let mut probe = store.clone();
    let mut worst = 0.0f64;
    for &(id, i) in coords {
        let orig = store.get(id).data()[i];
        probe.get_mut(id).data_mut()[i] = orig + eps;
        let plus = f(&probe)?;
        probe.get_mut(id).data_mut()[i] = orig - eps;
        let minus = f(&probe)?;
        probe.get_mut(id).data_mut()[i] = orig;
        check_finite(plus)?;
        check_finite(minus)?;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.get(id).data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

fn check_finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("function value {v} is not finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::*;
    use crate::nn::params::ParamStore;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn quadratic_is_exact() {
        let err = grad_check(
            |_, x| Ok(x.mul(x)?.sum()),
            &Tensor::vector(vec![1.0, 2.0]),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let err = grad_check(
            |t, _| Ok(t.constant(Tensor::scalar(4.0))),
            &Tensor::vector(vec![1.0, 2.0]),
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_finite_is_numeric_error() {
        let r = grad_check(|_, x| Ok(x.ln().sum()), &Tensor::vector(vec![-1.0]), 1e-5);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn every_layer_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "lin", 6, 4, &mut rng);
        let ln = LayerNorm::new(&mut store, "ln", 6);
        let mha = MultiHeadAttention::new(&mut store, "mha", 6, 2, &mut rng).unwrap();
        let ffn = FeedForward::new(&mut store, "ffn", 6, 8, &mut rng);
        let emb = Embedding::new(&mut store, "emb", 5, 6, 0.5, &mut rng);
        let head = SigmoidHead::new(&mut store, "head", &[6, 3, 1], &mut rng);
        // perturb layer-norm affine so it is not the identity
        *store.get_mut(ln.gamma) = random(&[6], &mut rng);
        let x = random(&[5, 6], &mut rng);
        let mem = random(&[7, 6], &mut rng);
        let w = random(&[5, 6], &mut rng);
        let weights = |t: &Tensor| t.clone();

        let checks: Vec<(&str, f64)> = vec![
            (
                "linear",
                grad_check(
                    |t, x| Ok(lin.forward(t, &store, x)?.mul(t.constant(random_like(&[5, 4])))?.sum()),
                    &x,
                    1e-5,
                )
                .unwrap(),
            ),
            (
                "layer_norm",
                grad_check(
                    |t, x| Ok(ln.forward(t, &store, x)?.mul(t.constant(weights(&w)))?.sum()),
                    &x,
                    1e-5,
                )
                .unwrap(),
            ),
            (
                "attention",
                grad_check(
                    |t, x| {
                        let m = t.constant(mem.clone());
                        Ok(mha.forward(t, &store, x, m)?.mul(t.constant(weights(&w)))?.sum())
                    },
                    &x,
                    1e-5,
                )
                .unwrap(),
            ),
            (
                "attention_memory",
                grad_check(
                    |t, m| {
                        let q = t.constant(x.clone());
                        Ok(mha.forward(t, &store, q, m)?.mul(t.constant(weights(&w)))?.sum())
                    },
                    &mem,
                    1e-5,
                )
                .unwrap(),
            ),
            (
                "feed_forward",
                grad_check(
                    |t, x| Ok(ffn.forward(t, &store, x)?.mul(t.constant(weights(&w)))?.sum()),
                    &x,
                    1e-5,
                )
                .unwrap(),
            ),
            (
                "embedding",
                grad_check(
                    |t, x| Ok(emb.all(t, &store).add(x)?.mul(x)?.sum()),
                    &x,
                    1e-5,
                )
                .unwrap(),
            ),
            (
                "sigmoid_head",
                grad_check(|t, x| Ok(head.forward(t, &store, x)?.ln().sum()), &x, 1e-5).unwrap(),
            ),
        ];
        for (name, err) in checks {
            assert!(err < 1e-5, "{name}: {err}");
        }
    }

    fn random_like(shape: &[usize]) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        random(shape, &mut rng)
    }
}
