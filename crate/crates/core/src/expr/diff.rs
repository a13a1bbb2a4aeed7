use super::{Expr, Func};

pub(super) fn differentiate(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var => Expr::Const(1.0),
        Expr::Neg(u) => Expr::neg(differentiate(u)),
        Expr::Add(u, v) => Expr::add(differentiate(u), differentiate(v)),
        Expr::Sub(u, v) => Expr::sub(differentiate(u), differentiate(v)),
        Expr::Mul(u, v) => Expr::add(
            Expr::mul(differentiate(u), (**v).clone()),
            Expr::mul((**u).clone(), differentiate(v)),
        ),
        Expr::Div(u, v) => {
            let du = differentiate(u);
            let dv = differentiate(v);
            if dv.is_const() == Some(0.0) {
                return Expr::div(du, (**v).clone());
            }
            Expr::div(
                Expr::sub(Expr::mul(du, (**v).clone()), Expr::mul((**u).clone(), dv)),
                Expr::pow((**v).clone(), 2),
            )
        }
        Expr::Pow(u, n) => {
            if *n == 0 {
                return Expr::Const(0.0);
            }
            Expr::mul(
                Expr::mul(Expr::Const(*n as f64), Expr::pow((**u).clone(), n - 1)),
                differentiate(u),
            )
        }
        Expr::Call(f, u) => {
            let du = differentiate(u);
            let inner = (**u).clone();
            let outer = match f {
                Func::Exp => Expr::call(Func::Exp, inner),
                Func::Log => return Expr::div(du, inner),
                Func::Sin => Expr::call(Func::Cos, inner),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                Func::Sqrt => {
                    return Expr::div(
                        du,
                        Expr::mul(Expr::Const(2.0), Expr::call(Func::Sqrt, inner)),
                    )
                }
            };
            Expr::mul(outer, du)
        }
    }
}
