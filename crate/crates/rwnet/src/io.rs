//! Files on disk: networks, bias vectors, datasets, circuits, MNIST.
//!
//! Dataset text format: one sample per line, `<class> v1 v2 ... vD`. A
//! symbolic dataset starts with `alphabet <symbols>` and then has lines
//! `<class> <string>`, one-hot encoded on load. Blank lines and lines
//! starting with `#` are skipped in both.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rwnet_core::builders::BooleanCircuit;
use rwnet_core::encode::{binarized_samples, encode_symbolic, parse_idx_images, parse_idx_labels};
use rwnet_core::{BiasVector, Network, Sample};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    Ok(Network::from_text(&read_text(path)?)?)
}

pub fn save_network(path: &Path, network: &Network) -> Result<()> {
    write_text(path, &network.to_text())
}

pub fn load_biases(path: &Path, network: &Network) -> Result<BiasVector> {
    Ok(BiasVector::from_text(&read_text(path)?, network)?)
}

pub fn save_biases(path: &Path, biases: &BiasVector) -> Result<()> {
    write_text(path, &biases.to_text())
}

pub fn load_circuit(path: &Path) -> Result<BooleanCircuit> {
    Ok(BooleanCircuit::from_text(&read_text(path)?)?)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_class(tok: Option<&str>, line: usize) -> Result<usize> {
    let tok = tok.ok_or(Error::Parse {
        line,
        msg: "missing class".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad class {tok:?}"),
    })
}

/// Parses one numeric sample line `<class> v1 ... vD`.
pub fn parse_sample_line(text: &str, line: usize) -> Result<Sample> {
    let mut toks = text.split_whitespace();
    let class = parse_class(toks.next(), line)?;
    let input = toks
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad value {t:?}"),
            })?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("input value {v} is not a finite non-negative number"),
                });
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    if input.is_empty() {
        return Err(Error::Parse {
            line,
            msg: "sample has no input values".into(),
        });
    }
    Ok(Sample::new(input, class))
}

/// Parses a numeric or symbolic dataset. All samples must have equal width.
pub fn parse_dataset(text: &str) -> Result<Vec<Sample>> {
    let mut lines = data_lines(text).peekable();
    let alphabet = match lines.peek() {
        Some((_, l)) if l.starts_with("alphabet") => {
            let (line, l) = lines.next().unwrap();
            let sym = l["alphabet".len()..].trim();
            if sym.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty alphabet".into(),
                });
            }
            Some(sym.as_bytes().to_vec())
        }
        _ => None,
    };
    let mut samples = Vec::new();
    for (line, l) in lines {
        let s = match &alphabet {
            None => parse_sample_line(l, line)?,
            Some(alpha) => {
                let mut toks = l.split_whitespace();
                let class = parse_class(toks.next(), line)?;
                let string = toks.next().ok_or(Error::Parse {
                    line,
                    msg: "missing string".into(),
                })?;
                let input = encode_symbolic(string.as_bytes(), alpha).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                Sample::new(input, class)
            }
        };
        if let Some(first) = samples.first().map(|f: &Sample| f.input.len()) {
            if s.input.len() != first {
                return Err(Error::Parse {
                    line,
                    msg: format!("sample has {} values, expected {first}", s.input.len()),
                });
            }
        }
        samples.push(s);
    }
    Ok(samples)
}

pub fn format_dataset(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        write!(out, "{}", s.class).unwrap();
        for v in &s.input {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_symbolic(alphabet: &[u8], rows: &[(usize, Vec<u8>)]) -> String {
    let mut out = format!("alphabet {}\n", String::from_utf8_lossy(alphabet));
    for (class, s) in rows {
        writeln!(out, "{class} {}", String::from_utf8_lossy(s)).unwrap();
    }
    out
}

pub fn load_dataset(path: &Path) -> Result<Vec<Sample>> {
    parse_dataset(&read_text(path)?)
}

/// Reads an MNIST image/label file pair as binarized doubled samples.
pub fn load_mnist(images: &Path, labels: &Path) -> Result<Vec<Sample>> {
    let img = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lab = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    Ok(binarized_samples(&parse_idx_images(&img)?, &parse_idx_labels(&lab)?)?)
}

/// Checks that every sample fits the network's input and output counts.
pub fn check_dataset(network: &Network, samples: &[Sample], what: &str) -> Result<()> {
    for (k, s) in samples.iter().enumerate() {
        if s.input.len() != network.num_inputs() {
            return Err(Error::Usage(format!(
                "{what} sample {k} has {} inputs, network has {}",
                s.input.len(),
                network.num_inputs()
            )));
        }
        if s.class >= network.num_outputs() {
            return Err(Error::Usage(format!(
                "{what} sample {k} has class {}, network has {} outputs",
                s.class,
                network.num_outputs()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rwnet_core::synthdata::{markov_generate, MARKOV_ALPHABET};

    #[test]
    fn numeric_round_trip() {
        let samples = vec![
            Sample::new(vec![0.1, 1.0, 0.0], 1),
            Sample::new(vec![1.0 / 3.0, 2.5e-17, 7.0], 0),
        ];
        let back = parse_dataset(&format_dataset(&samples)).unwrap();
        assert_eq!(back, samples);
    }

    #[test]
    fn symbolic_matches_encoder() {
        let rows: Vec<(usize, Vec<u8>)> = markov_generate(12, 5, 3)
            .into_iter()
            .map(|(c, s)| (c, s.iter().map(|&k| MARKOV_ALPHABET[k as usize]).collect()))
            .collect();
        let samples = parse_dataset(&format_symbolic(MARKOV_ALPHABET, &rows)).unwrap();
        assert_eq!(samples.len(), 5);
        for (s, (c, text)) in samples.iter().zip(&rows) {
            assert_eq!(s.class, *c);
            assert_eq!(s.input, encode_symbolic(text, MARKOV_ALPHABET).unwrap());
            assert_eq!(s.input.iter().sum::<f64>(), 12.0);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dataset("# header\n0 1 0\n1 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_dataset("0 1 0\n1 1\n").is_err());
        assert!(parse_dataset("0 -1 0\n").is_err());
        assert!(parse_dataset("alphabet AB\n0 AC\n").is_err());
        assert!(parse_dataset("").unwrap().is_empty());
    }
}
