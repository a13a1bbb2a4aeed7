use super::{Expr, Func};

const STACK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Square,
    PowI(i32),
    Call(Func),
}

/// Postfix form of an [`Expr`] for the estimator's inner loop.
///
/// Evaluation performs the same floating-point operations in the same order
/// as [`Expr::eval`], so both give bit-identical results.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    pub fn compile(e: &Expr) -> Self {
        let mut ops = Vec::new();
        let mut depth = 0;
        emit(e, &mut ops, 0, &mut depth);
        Program { ops, depth }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        if self.depth > STACK {
            return self.eval_spilled(z);
        }
        let mut stack = [0.0f64; STACK];
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    stack[sp] = c;
                    sp += 1;
                }
                Op::Var => {
                    stack[sp] = z;
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Square => stack[sp - 1] *= stack[sp - 1],
                Op::PowI(n) => stack[sp - 1] = stack[sp - 1].powi(n),
                Op::Call(f) => stack[sp - 1] = f.apply(stack[sp - 1]),
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    sp -= 1;
                    let r = stack[sp];
                    let l = &mut stack[sp - 1];
                    *l = match *op {
                        Op::Add => *l + r,
                        Op::Sub => *l - r,
                        Op::Mul => *l * r,
                        _ => *l / r,
                    };
                }
            }
        }
        stack[0]
    }

    fn eval_spilled(&self, z: f64) -> f64 {
        let mut stack = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Var => stack.push(z),
                Op::Neg => {
                    let v = stack.pop().unwrap();
                    stack.push(-v);
                }
                Op::Square => {
                    let v = stack.pop().unwrap();
                    stack.push(v * v);
                }
                Op::PowI(n) => {
                    let v = stack.pop().unwrap();
                    stack.push(v.powi(n));
                }
                Op::Call(f) => {
                    let v = stack.pop().unwrap();
                    stack.push(f.apply(v));
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let r = stack.pop().unwrap();
                    let l = stack.pop().unwrap();
                    stack.push(match *op {
                        Op::Add => l + r,
                        Op::Sub => l - r,
                        Op::Mul => l * r,
                        _ => l / r,
                    });
                }
            }
        }
        stack[0]
    }
}

impl Program {
    /// Evaluates at every point of `zs`, writing into `out`.
    ///
    /// The stack holds one column per slot, so each operation is dispatched
    /// once per batch instead of once per point; per point the arithmetic is
    /// the same as [`Program::eval`]. `scratch` is reused between calls.
    pub fn eval_batch(&self, zs: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = zs.len();
        assert_eq!(out.len(), n, "output length mismatch");
        if n == 0 {
            return;
        }
        scratch.resize(self.depth * n, 0.0);
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    scratch[sp * n..(sp + 1) * n].fill(c);
                    sp += 1;
                }
                Op::Var => {
                    scratch[sp * n..(sp + 1) * n].copy_from_slice(zs);
                    sp += 1;
                }
                Op::Neg => scratch[(sp - 1) * n..sp * n]
                    .iter_mut()
                    .for_each(|v| *v = -*v),
                Op::Square => scratch[(sp - 1) * n..sp * n]
                    .iter_mut()
                    .for_each(|v| *v *= *v),
                Op::PowI(k) => scratch[(sp - 1) * n..sp * n]
                    .iter_mut()
                    .for_each(|v| *v = v.powi(k)),
                Op::Call(f) => scratch[(sp - 1) * n..sp * n]
                    .iter_mut()
                    .for_each(|v| *v = f.apply(*v)),
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    sp -= 1;
                    let (lo, hi) = scratch.split_at_mut(sp * n);
                    let l = &mut lo[(sp - 1) * n..];
                    let r = &hi[..n];
                    match *op {
                        Op::Add => l.iter_mut().zip(r).for_each(|(a, b)| *a += b),
                        Op::Sub => l.iter_mut().zip(r).for_each(|(a, b)| *a -= b),
                        Op::Mul => l.iter_mut().zip(r).for_each(|(a, b)| *a *= b),
                        _ => l.iter_mut().zip(r).for_each(|(a, b)| *a /= b),
                    }
                }
            }
        }
        out.copy_from_slice(&scratch[..n]);
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>, sp: usize, depth: &mut usize) {
    *depth = (*depth).max(sp + 1);
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var => ops.push(Op::Var),
        Expr::Neg(u) => {
            emit(u, ops, sp, depth);
            ops.push(Op::Neg);
        }
        // x*x with identical operands: one evaluation, exact same product.
        Expr::Mul(l, r) if l == r => {
            emit(l, ops, sp, depth);
            ops.push(Op::Square);
        }
        Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
            emit(l, ops, sp, depth);
            emit(r, ops, sp + 1, depth);
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
        Expr::Pow(b, n) => {
            emit(b, ops, sp, depth);
            ops.push(Op::PowI(*n));
        }
        Expr::Call(f, u) => {
            emit(u, ops, sp, depth);
            ops.push(Op::Call(*f));
        }
    }
}
