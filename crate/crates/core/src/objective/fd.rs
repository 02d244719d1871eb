use super::{Batch, Objective, ObjectiveError, ParamVector};

/// Default central-difference step for gradients, `1e-5·(1 + ‖w‖∞)`.
pub fn default_grad_step(w: &ParamVector) -> f64 {
    1e-5 * (1.0 + w.norm_inf())
}

/// Default finite-difference step for Hessian-vector products, `1e-3·(1 + ‖w‖∞)`.
pub fn default_hvp_step(w: &ParamVector) -> f64 {
    1e-3 * (1.0 + w.norm_inf())
}

/// Central-difference gradient, one coordinate at a time.
pub fn fd_grad<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    h: f64,
    batch: &Batch,
) -> Result<ParamVector, ObjectiveError> {
    check_step(h)?;
    check_dim(obj, w)?;
    let mut probe = w.clone();
    let mut out = Vec::with_capacity(w.dim());
    for i in 0..w.dim() {
        let orig = w[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = obj.loss(&probe, batch);
        probe.as_mut_slice()[i] = orig - h;
        let minus = obj.loss(&probe, batch);
        probe.as_mut_slice()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(ObjectiveError::NonFiniteLoss { coordinate: i });
        }
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(ParamVector::from(out))
}

/// Hessian-vector product from a central difference of gradients,
/// `(g(w + αv) − g(w − αv)) / 2α`.
///
/// The truncation error is third order in the gradient, so it vanishes for
/// objectives whose gradient is at most quadratic in `w`.
pub fn fd_hvp<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    v: &ParamVector,
    alpha: f64,
    batch: &Batch,
) -> Result<ParamVector, ObjectiveError> {
    check_step(alpha)?;
    check_dim(obj, w)?;
    check_dim(obj, v)?;
    let vn = v.norm();
    if vn < 1e-12 {
        return Err(ObjectiveError::DegenerateDirection(vn));
    }
    let plus = obj.grad(&w.add_scaled(alpha, v), batch);
    let minus = obj.grad(&w.add_scaled(-alpha, v), batch);
    if !plus.is_finite() || !minus.is_finite() {
        return Err(ObjectiveError::NonFiniteGradient("finite-difference probe"));
    }
    Ok(plus.sub(&minus).scale(1.0 / (2.0 * alpha)))
}

/// Rayleigh quotient `vᵀ Ĥ v / vᵀ v` using [`fd_hvp`].
pub fn rayleigh<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    v: &ParamVector,
    alpha: f64,
    batch: &Batch,
) -> Result<f64, ObjectiveError> {
    let hv = fd_hvp(obj, w, v, alpha, batch)?;
    Ok(v.dot(&hv) / v.dot(v))
}

fn check_step(h: f64) -> Result<(), ObjectiveError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(ObjectiveError::InvalidStep(h))
    }
}

fn check_dim<O: Objective + ?Sized>(obj: &O, v: &ParamVector) -> Result<(), ObjectiveError> {
    if v.dim() == obj.dim() {
        Ok(())
    } else {
        Err(ObjectiveError::DimMismatch {
            expected: obj.dim(),
            got: v.dim(),
        })
    }
}
