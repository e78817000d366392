//! Extraction of staged recurrence specifications from formulas of the shape
//! `G (F[I1] p1 & F[I2] p2 & ...)`, the fragment the automaton compiler
//! supports. Anything else is reported as unsupported, never approximated.

use crate::mitl::{Formula, Interval};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("unsupported fragment: {0}; expected `G (F[l,u] p & F[l,u] q & ...)`")]
pub struct UnsupportedFragment(pub String);

/// Map a formula onto the ordered (proposition, window) stage list.
pub fn stages_from_formula(f: &Formula) -> Result<Vec<(String, Interval)>, UnsupportedFragment> {
    let body = match f {
        Formula::Always(body, iv) if *iv == Interval::full() => body,
        Formula::Always(_, _) => {
            return Err(UnsupportedFragment(
                "outer G must be unbounded ([0,inf))".into(),
            ))
        }
        _ => return Err(UnsupportedFragment("formula must start with G".into())),
    };
    let mut stages = Vec::new();
    collect_conjuncts(body, &mut stages)?;
    if stages.is_empty() {
        return Err(UnsupportedFragment("no F[..] stages found".into()));
    }
    Ok(stages)
}

fn collect_conjuncts(
    f: &Formula,
    out: &mut Vec<(String, Interval)>,
) -> Result<(), UnsupportedFragment> {
    match f {
        Formula::And(l, r) => {
            collect_conjuncts(l, out)?;
            collect_conjuncts(r, out)
        }
        Formula::Eventually(inner, iv) => match inner.as_ref() {
            Formula::Atom(p) => {
                out.push((p.clone(), *iv));
                Ok(())
            }
            other => Err(UnsupportedFragment(format!(
                "F must wrap a bare proposition, found {other:?}"
            ))),
        },
        other => Err(UnsupportedFragment(format!(
            "conjunct is not of the form F[l,u] p: {other:?}"
        ))),
    }
}
