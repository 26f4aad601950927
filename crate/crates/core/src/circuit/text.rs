//! Line-oriented circuit serialization.
//!
//! The format is versioned and self-delimiting: a header names the qubit
//! count and construction metadata, then each moment opens with a `moment`
//! line followed by one line per gate. Angles render through the shortest
//! round-tripping decimal form, so writing and re-parsing reproduces a
//! circuit bit for bit.
//!
//! ```text
//! tfim-circuit v1
//! qubits 9
//! meta steps=2 layers=5 merged=true dd=true rc=false amplified=false
//! moment single
//! r1q 0 0.25 0
//! moment zz 0 0
//! zz 0 1 -0.5
//! moment single close=1
//! moment heralds
//! herald 0
//! ```

use super::{Circuit, CircuitMeta, Gate, InsertionTag, Moment, MomentKind};
use crate::error::Error;
use crate::pauli::{PauliString, SitePauli};
use crate::real::Real;
use crate::Result;

const HEADER: &str = "tfim-circuit v1";

/// Render a circuit in the v1 text format.
pub fn write_text<T: Real>(circuit: &Circuit<T>) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("qubits {}\n", circuit.n));
    let m = &circuit.meta;
    out.push_str(&format!(
        "meta steps={} layers={} merged={} dd={} rc={} amplified={}\n",
        m.steps, m.layers_per_step, m.merged_x, m.dd, m.rc, m.amplified
    ));
    for moment in &circuit.moments {
        match moment.kind {
            MomentKind::SingleQubit { closes_step: None } => {
                out.push_str("moment single\n");
            }
            MomentKind::SingleQubit {
                closes_step: Some(s),
            } => {
                out.push_str(&format!("moment single close={s}\n"));
            }
            MomentKind::ZzLayer { step, layer } => {
                out.push_str(&format!("moment zz {step} {layer}\n"));
            }
            MomentKind::PauliFrame => out.push_str("moment frame\n"),
            MomentKind::Insertion => out.push_str("moment insert\n"),
            MomentKind::Heralds => out.push_str("moment heralds\n"),
        }
        for gate in &moment.gates {
            match gate {
                Gate::Zz { a, b, angle } => {
                    out.push_str(&format!("zz {a} {b} {angle}\n"));
                }
                Gate::OneQ { q, theta, phi } => {
                    out.push_str(&format!("r1q {q} {theta} {phi}\n"));
                }
                Gate::PauliInsertion { pauli, tag } => {
                    let tag = match tag {
                        InsertionTag::NoiseAmplification => "amp",
                    };
                    out.push_str(&format!("pauli {tag}"));
                    let mut mask = pauli.support();
                    while mask != 0 {
                        let q = mask.trailing_zeros() as usize;
                        mask &= mask - 1;
                        out.push_str(&format!(" {q}:{}", pauli.site(q).as_char()));
                    }
                    out.push('\n');
                }
                Gate::Herald { q } => {
                    out.push_str(&format!("herald {q}\n"));
                }
            }
        }
    }
    out
}

/// Parse the v1 text format.
pub fn parse_text<T: Real>(text: &str) -> Result<Circuit<T>> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, what: &str| -> Error {
        Error::parse(format!("line {}: {what}", line + 1))
    };

    let (i, header) = lines
        .next()
        .ok_or_else(|| Error::parse("empty circuit file"))?;
    if header.trim() != HEADER {
        return Err(bad(i, "missing `tfim-circuit v1` header"));
    }

    let (i, qubits_line) = lines
        .next()
        .ok_or_else(|| Error::parse("missing qubit count"))?;
    let n: usize = qubits_line
        .strip_prefix("qubits ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad(i, "expected `qubits <n>`"))?;
    if n == 0 || n > 128 {
        return Err(bad(i, "qubit count out of range"));
    }

    let (i, meta_line) = lines
        .next()
        .ok_or_else(|| Error::parse("missing meta line"))?;
    let meta = parse_meta(meta_line).ok_or_else(|| bad(i, "malformed meta line"))?;

    let mut moments: Vec<Moment<T>> = Vec::new();
    let parse_float = |line: usize, tok: &str| -> Result<T> {
        tok.parse::<T>()
            .map_err(|_| bad(line, &format!("bad number `{tok}`")))
    };
    let parse_qubit = |line: usize, tok: &str| -> Result<usize> {
        let q: usize = tok
            .parse()
            .map_err(|_| bad(line, &format!("bad qubit `{tok}`")))?;
        if q >= n {
            return Err(bad(line, &format!("qubit {q} outside 0..{n}")));
        }
        Ok(q)
    };

    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap();
        match key {
            "moment" => {
                let kind = tokens.next().ok_or_else(|| bad(i, "bare moment line"))?;
                let kind = match kind {
                    "single" => match tokens.next() {
                        None => MomentKind::SingleQubit { closes_step: None },
                        Some(tok) => {
                            let s = tok
                                .strip_prefix("close=")
                                .and_then(|v| v.parse().ok())
                                .ok_or_else(|| bad(i, "expected close=<step>"))?;
                            MomentKind::SingleQubit {
                                closes_step: Some(s),
                            }
                        }
                    },
                    "zz" => {
                        let step = tokens
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| bad(i, "expected `moment zz <step> <layer>`"))?;
                        let layer = tokens
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| bad(i, "expected `moment zz <step> <layer>`"))?;
                        MomentKind::ZzLayer { step, layer }
                    }
                    "frame" => MomentKind::PauliFrame,
                    "insert" => MomentKind::Insertion,
                    "heralds" => MomentKind::Heralds,
                    other => return Err(bad(i, &format!("unknown moment kind `{other}`"))),
                };
                moments.push(Moment {
                    kind,
                    gates: Vec::new(),
                });
            }
            "zz" | "r1q" | "pauli" | "herald" => {
                let moment = moments
                    .last_mut()
                    .ok_or_else(|| bad(i, "gate before any moment"))?;
                let gate = match key {
                    "zz" => {
                        let a = parse_qubit(i, tokens.next().ok_or_else(|| bad(i, "zz needs 3 fields"))?)?;
                        let b = parse_qubit(i, tokens.next().ok_or_else(|| bad(i, "zz needs 3 fields"))?)?;
                        let angle =
                            parse_float(i, tokens.next().ok_or_else(|| bad(i, "zz needs 3 fields"))?)?;
                        if a == b {
                            return Err(bad(i, "zz endpoints coincide"));
                        }
                        Gate::Zz { a, b, angle }
                    }
                    "r1q" => {
                        let q = parse_qubit(i, tokens.next().ok_or_else(|| bad(i, "r1q needs 3 fields"))?)?;
                        let theta =
                            parse_float(i, tokens.next().ok_or_else(|| bad(i, "r1q needs 3 fields"))?)?;
                        let phi =
                            parse_float(i, tokens.next().ok_or_else(|| bad(i, "r1q needs 3 fields"))?)?;
                        Gate::OneQ { q, theta, phi }
                    }
                    "pauli" => {
                        let tag = match tokens.next() {
                            Some("amp") => InsertionTag::NoiseAmplification,
                            _ => return Err(bad(i, "pauli line needs a tag")),
                        };
                        let mut pauli = PauliString::identity();
                        let mut any = false;
                        for tok in tokens.by_ref() {
                            let (q, p) = tok
                                .split_once(':')
                                .ok_or_else(|| bad(i, "expected <q>:<P>"))?;
                            let q = parse_qubit(i, q)?;
                            if p.len() != 1 {
                                return Err(bad(i, "bad Pauli letter"));
                            }
                            let p = p
                                .chars()
                                .next()
                                .and_then(SitePauli::from_char)
                                .filter(|&p| p != SitePauli::I)
                                .ok_or_else(|| bad(i, "bad Pauli letter"))?;
                            pauli = pauli.with_site(q, p);
                            any = true;
                        }
                        if !any {
                            return Err(bad(i, "empty pauli insertion"));
                        }
                        Gate::PauliInsertion { pauli, tag }
                    }
                    "herald" => {
                        let q = parse_qubit(i, tokens.next().ok_or_else(|| bad(i, "herald needs a qubit"))?)?;
                        Gate::Herald { q }
                    }
                    _ => unreachable!(),
                };
                if tokens.next().is_some() && key != "pauli" {
                    return Err(bad(i, "trailing tokens"));
                }
                moment.gates.push(gate);
            }
            other => return Err(bad(i, &format!("unknown directive `{other}`"))),
        }
    }

    let circuit = Circuit { n, moments, meta };
    if !circuit.moments_disjoint() {
        return Err(Error::parse("a moment reuses a qubit"));
    }
    Ok(circuit)
}

fn parse_meta(line: &str) -> Option<CircuitMeta> {
    let rest = line.strip_prefix("meta ")?;
    let mut meta = CircuitMeta::default();
    for pair in rest.split_whitespace() {
        let (key, value) = pair.split_once('=')?;
        match key {
            "steps" => meta.steps = value.parse().ok()?,
            "layers" => meta.layers_per_step = value.parse().ok()?,
            "merged" => meta.merged_x = value.parse().ok()?,
            "dd" => meta.dd = value.parse().ok()?,
            "rc" => meta.rc = value.parse().ok()?,
            "amplified" => meta.amplified = value.parse().ok()?,
            _ => return None,
        }
    }
    Some(meta)
}
