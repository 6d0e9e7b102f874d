//! Closed-form expressions in `t` (and an optional parameter `mu`).
//!
//! Grammar: numbers, `t`, `mu`, `+ - * / ^`, parentheses, the functions
//! `sin cos tan exp log ln sqrt abs` and more, and the constants `pi`, `e`.

use meval::{Context, Expr};

use crate::error::{BvpError, Result};

/// A parsed expression that can be evaluated at `(t, mu)`.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    expr: Expr,
}

fn context() -> Context<'static> {
    let mut ctx = Context::new();
    ctx.func("log", f64::ln);
    ctx
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let expr: Expr = source
            .parse()
            .map_err(|e| BvpError::InvalidInput(format!("cannot parse expression `{source}`: {e}")))?;
        let parsed = Self {
            source: source.to_string(),
            expr,
        };
        // reject unknown identifiers up front
        parsed.eval(0.0, 0.0)?;
        Ok(parsed)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64, mu: f64) -> Result<f64> {
        let mut ctx = context();
        ctx.var("t", t).var("mu", mu);
        self.expr
            .eval_with_context(ctx)
            .map_err(|e| BvpError::InvalidInput(format!("cannot evaluate `{}`: {e}", self.source)))
    }

    /// Binds the expression to a fast closure of `t` for fixed `mu`.
    pub fn bind(&self, mu: f64) -> Result<impl Fn(f64) -> f64 + '_> {
        let mut ctx = context();
        ctx.var("mu", mu);
        self.expr
            .clone()
            .bind_with_context(ctx, "t")
            .map_err(|e| BvpError::InvalidInput(format!("cannot bind `{}`: {e}", self.source)))
    }
}
