use super::{BinaryOp, Expr};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => PREC_NEG,
        Expr::Const(_) | Expr::Var(_) | Expr::Sigma | Expr::Unary(..) | Expr::Nary(..) => {
            PREC_ATOM
        }
        Expr::Neg(_) => PREC_NEG,
        Expr::Binary(op, ..) => match op {
            BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
            BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
            BinaryOp::Pow => PREC_POW,
        },
    }
}

/// Shortest text that parses back to exactly `v`.
pub(crate) fn format_number(v: f64) -> String {
    let mag = v.abs();
    let body = if mag != 0.0 && !(1e-5..1e16).contains(&mag) {
        format!("{mag:e}")
    } else {
        format!("{mag}")
    };
    if v.is_sign_negative() {
        format!("-{body}")
    } else {
        body
    }
}

pub(crate) fn to_string(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn write_child(e: &Expr, min_prec: u8, out: &mut String) {
    if precedence(e) < min_prec {
        out.push('(');
        write(e, out);
        out.push(')');
    } else {
        write(e, out);
    }
}

fn write(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(c) => out.push_str(&format_number(*c)),
        Expr::Var(i) => {
            out.push('x');
            out.push_str(&(i + 1).to_string());
        }
        Expr::Sigma => out.push_str("sigma"),
        Expr::Neg(inner) => {
            out.push('-');
            write_child(inner, PREC_NEG, out);
        }
        Expr::Unary(op, inner) => {
            out.push_str(op.name());
            out.push('(');
            write(inner, out);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            let (left, right) = match op {
                BinaryOp::Add | BinaryOp::Sub => (PREC_ADD, PREC_MUL),
                BinaryOp::Mul | BinaryOp::Div => (PREC_MUL, PREC_NEG),
                BinaryOp::Pow => (PREC_ATOM, PREC_NEG),
            };
            write_child(a, left, out);
            if *op == BinaryOp::Pow {
                out.push('^');
            } else {
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
            }
            write_child(b, right, out);
        }
        Expr::Nary(op, args) => {
            out.push_str(op.name());
            out.push('(');
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write(a, out);
            }
            out.push(')');
        }
    }
}
