use std::sync::Mutex;

use num_complex::Complex64;

use super::bump::TestForm;
use crate::error::{Error, Result};
use crate::forms::multiindex::full;
use crate::forms::{top_form_factor, FormField, LocalForm};

type C = Complex64;

fn check_degrees(n: usize, t: (usize, usize), beta: (usize, usize)) -> Result<()> {
    if t.0 + beta.0 != n || t.1 + beta.1 != n {
        return Err(Error::DegreeMismatch(format!(
            "a ({},{})-current pairs with ({},{})-forms in dimension {n}, got a ({},{})-form",
            t.0,
            t.1,
            n - t.0.min(n),
            n - t.1.min(n),
            beta.0,
            beta.1
        )));
    }
    Ok(())
}

/// `∫ T ∧ β` over the support of `β`.
pub fn pair(t: &FormField, beta: &TestForm) -> Result<C> {
    if t.chart() != beta.chart() {
        return Err(Error::ChartMismatch);
    }
    let out = pair_nodewise(beta, t.bidegree(), 1, |node, forms| {
        forms[0] = t.local(node);
        Ok(())
    })?;
    Ok(out[0])
}

/// `∫ T_i ∧ β` for `count` forms `T_i` produced node by node, without storing them.
pub fn pair_nodewise<F>(beta: &TestForm, bidegree: (usize, usize), count: usize, f: F) -> Result<Vec<C>>
where
    F: Fn(usize, &mut [LocalForm]) -> Result<()> + Sync,
{
    let chart = beta.chart();
    let n = chart.dim();
    check_degrees(n, bidegree, beta.bidegree())?;
    let top = full(n);
    let factor = top_form_factor(n);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let sums = beta.quadrature().sum_many(count, |node, out| {
        let mut forms = vec![LocalForm::zero(); count];
        if let Err(e) = f(node, &mut forms) {
            failure.lock().expect("no poisoning").get_or_insert(e);
            return;
        }
        let b = beta.field.local(node);
        for (o, t) in out.iter_mut().zip(&forms) {
            *o = t.wedge(&b).get(top, top) * factor;
        }
    });
    match failure.into_inner().expect("no poisoning") {
        Some(e) => Err(e),
        None => Ok(sums),
    }
}
