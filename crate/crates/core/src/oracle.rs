use crate::error::{Error, Result};
use crate::model::{Cut, Vector};
use crate::problems::ProblemSpec;

/// Counting wrapper around a problem's subgradient oracle with an optional
/// call budget.
#[derive(Debug)]
pub struct Oracle<'p> {
    problem: &'p ProblemSpec,
    calls: usize,
    budget: Option<usize>,
    /// `f` at every call, in order.
    pub history: Vec<f64>,
}

impl<'p> Oracle<'p> {
    pub fn new(problem: &'p ProblemSpec, budget: Option<usize>) -> Self {
        Self {
            problem,
            calls: 0,
            budget,
            history: Vec::new(),
        }
    }

    pub fn problem(&self) -> &'p ProblemSpec {
        self.problem
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn remaining(&self) -> Option<usize> {
        self.budget.map(|b| b.saturating_sub(self.calls))
    }

    pub fn eval(&mut self, x: &Vector) -> Result<(f64, Vector)> {
        if let Some(b) = self.budget {
            if self.calls >= b {
                return Err(Error::BudgetExhausted(b));
            }
        }
        let (f, g) = self.problem.oracle_eval(x)?;
        self.calls += 1;
        self.history.push(f);
        Ok((f, g))
    }

    pub fn cut(&mut self, x: &Vector) -> Result<Cut> {
        let (f, g) = self.eval(x)?;
        Ok(Cut::new(x.clone(), f, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::find;

    #[test]
    fn counts_and_enforces_budget() {
        let p = find("quad1d").unwrap();
        let mut o = Oracle::new(&p, Some(2));
        let x = Vector::zeros(1);
        o.eval(&x).unwrap();
        o.cut(&x).unwrap();
        assert_eq!(o.calls(), 2);
        assert_eq!(o.remaining(), Some(0));
        assert!(matches!(o.eval(&x), Err(Error::BudgetExhausted(2))));
        assert_eq!(o.history, vec![0.5, 0.5]);
    }
}
