//! Architecture text: a sequence of layer forms, optionally wrapped in
//! `(chain ...)`.
//!
//! ```text
//! (linear IN OUT)      (bias N)              (activation NAME N)
//! (dense IN OUT [ACT]) (gcnn NODES IN OUT ACT) (attention SEQ KEY VAL)
//! ```

use anyhow::{bail, Result};

use crate::config::LayerConfig;

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn offset(&self) -> usize {
        match self {
            Sexp::Atom(_, o) | Sexp::List(_, o) => *o,
        }
    }
}

fn tokens(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &text[s..i]));
            }
            if !c.is_whitespace() {
                out.push((i, &text[i..i + 1]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out
}

fn read(toks: &[(usize, &str)], pos: &mut usize) -> Result<Sexp> {
    let Some(&(off, t)) = toks.get(*pos) else {
        bail!("unexpected end of architecture text");
    };
    *pos += 1;
    match t {
        "(" => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos) {
                    None => bail!("unclosed `(` at offset {off}"),
                    Some((_, ")")) => {
                        *pos += 1;
                        return Ok(Sexp::List(items, off));
                    }
                    Some(_) => items.push(read(toks, pos)?),
                }
            }
        }
        ")" => bail!("unexpected `)` at offset {off}"),
        atom => Ok(Sexp::Atom(atom.to_string(), off)),
    }
}

fn num(e: &Sexp) -> Result<usize> {
    match e {
        Sexp::Atom(a, off) => match a.parse::<usize>() {
            Ok(n) => Ok(n),
            Err(_) => bail!("expected a dimension at offset {off}, found `{a}`"),
        },
        Sexp::List(_, off) => bail!("expected a dimension at offset {off}, found a list"),
    }
}

fn name(e: &Sexp) -> Result<String> {
    match e {
        Sexp::Atom(a, _) => Ok(a.clone()),
        Sexp::List(_, off) => bail!("expected a name at offset {off}, found a list"),
    }
}

fn layer(head: &str, args: &[Sexp], off: usize, out: &mut Vec<LayerConfig>) -> Result<()> {
    let arity = |n: usize| -> Result<()> {
        if args.len() != n {
            bail!(
                "`{head}` at offset {off} takes {n} arguments, got {}",
                args.len()
            );
        }
        Ok(())
    };
    let l = match head {
        "chain" | "seq" => {
            for a in args {
                form(a, out)?;
            }
            return Ok(());
        }
        "linear" => {
            arity(2)?;
            LayerConfig::Linear {
                input: num(&args[0])?,
                output: num(&args[1])?,
            }
        }
        "bias" => {
            arity(1)?;
            LayerConfig::Bias { n: num(&args[0])? }
        }
        "activation" | "act" => {
            arity(2)?;
            LayerConfig::Activation {
                activation: name(&args[0])?,
                n: num(&args[1])?,
            }
        }
        "dense" => {
            if args.len() == 2 {
                LayerConfig::Dense {
                    input: num(&args[0])?,
                    output: num(&args[1])?,
                    activation: "identity".into(),
                }
            } else {
                arity(3)?;
                LayerConfig::Dense {
                    input: num(&args[0])?,
                    output: num(&args[1])?,
                    activation: name(&args[2])?,
                }
            }
        }
        "gcnn" => {
            arity(4)?;
            LayerConfig::Gcnn {
                nodes: num(&args[0])?,
                input: num(&args[1])?,
                output: num(&args[2])?,
                activation: name(&args[3])?,
            }
        }
        "attention" => {
            arity(3)?;
            LayerConfig::Attention {
                seq: num(&args[0])?,
                key: num(&args[1])?,
                val: num(&args[2])?,
            }
        }
        other => bail!("unknown layer `{other}` at offset {off}"),
    };
    out.push(l);
    Ok(())
}

fn form(e: &Sexp, out: &mut Vec<LayerConfig>) -> Result<()> {
    match e {
        Sexp::List(items, off) => match items.split_first() {
            Some((Sexp::Atom(head, _), args)) => layer(head, args, *off, out),
            _ => bail!("expected `(layer ...)` at offset {off}"),
        },
        atom => bail!("expected `(layer ...)` at offset {}", atom.offset()),
    }
}

pub fn parse_layers(text: &str) -> Result<Vec<LayerConfig>> {
    let toks = tokens(text);
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < toks.len() {
        let e = read(&toks, &mut pos)?;
        form(&e, &mut out)?;
    }
    Ok(out)
}

/// The text form of a layer list; [`parse_layers`] inverts it.
pub fn render(layers: &[LayerConfig]) -> String {
    let forms: Vec<String> = layers
        .iter()
        .map(|l| match l {
            LayerConfig::Linear { input, output } => format!("(linear {input} {output})"),
            LayerConfig::Bias { n } => format!("(bias {n})"),
            LayerConfig::Activation { activation, n } => format!("(activation {activation} {n})"),
            LayerConfig::Dense {
                input,
                output,
                activation,
            } => format!("(dense {input} {output} {activation})"),
            LayerConfig::Gcnn {
                nodes,
                input,
                output,
                activation,
            } => format!("(gcnn {nodes} {input} {output} {activation})"),
            LayerConfig::Attention { seq, key, val } => format!("(attention {seq} {key} {val})"),
        })
        .collect();
    format!("(chain {})", forms.join(" "))
}
