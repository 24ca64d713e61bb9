//! Multi-frame XYZ files.

use std::fmt::Write as _;

use ndarray::Array2;

use super::Conformer;
use crate::error::{Error, Result};

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Atomic number of an element symbol (case-insensitive) or of a bare number.
pub fn atomic_number(symbol: &str) -> Option<u32> {
    if let Ok(z) = symbol.parse::<u32>() {
        return (1..=118).contains(&z).then_some(z);
    }
    ELEMENTS
        .iter()
        .position(|e| e.eq_ignore_ascii_case(symbol))
        .map(|i| i as u32 + 1)
}

pub fn element_symbol(z: u32) -> Option<&'static str> {
    z.checked_sub(1).and_then(|i| ELEMENTS.get(i as usize)).copied()
}

/// Parse concatenated XYZ frames; all frames must list the same atoms.
pub fn parse_xyz(text: &str) -> Result<Vec<Conformer>> {
    let mut lines = text.lines().enumerate().peekable();
    let mut frames: Vec<Conformer> = Vec::new();
    loop {
        while lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.next();
        }
        let Some((lineno, count_line)) = lines.next() else { break };
        let n: usize = count_line.trim().parse().map_err(|_| {
            Error::Parse(format!("line {}: malformed atom count {:?}", lineno + 1, count_line.trim()))
        })?;
        if n == 0 {
            return Err(Error::Parse(format!("line {}: atom count must be ≥ 1", lineno + 1)));
        }
        if lines.next().is_none() {
            return Err(Error::Parse(format!("frame {}: missing comment line", frames.len() + 1)));
        }
        let mut z = Vec::with_capacity(n);
        let mut r = Array2::zeros((n, 3));
        for i in 0..n {
            let (lineno, line) = lines.next().ok_or_else(|| {
                Error::Parse(format!("frame {}: expected {n} atoms, found {i}", frames.len() + 1))
            })?;
            let mut parts = line.split_whitespace();
            let sym = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: empty atom line", lineno + 1)))?;
            z.push(atomic_number(sym).ok_or_else(|| {
                Error::Parse(format!("line {}: unknown element {sym:?}", lineno + 1))
            })?);
            for k in 0..3 {
                let tok = parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: expected 3 coordinates", lineno + 1)))?;
                r[[i, k]] = tok.parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad coordinate {tok:?}", lineno + 1))
                })?;
            }
        }
        if let Some(first) = frames.first() {
            if first.atomic_numbers() != z.as_slice() {
                return Err(Error::Parse(format!(
                    "atom sequence mismatch in frame {}",
                    frames.len() + 1
                )));
            }
        }
        frames.push(Conformer::new(z, r)?);
    }
    if frames.is_empty() {
        return Err(Error::Empty("no XYZ frames"));
    }
    Ok(frames)
}

pub fn write_xyz(conformers: &[Conformer]) -> String {
    let mut out = String::new();
    for (k, c) in conformers.iter().enumerate() {
        let _ = writeln!(out, "{}\nconformer {k}", c.n());
        for (z, p) in c.atomic_numbers().iter().zip(c.coordinates().rows()) {
            let sym = element_symbol(*z).unwrap_or("X");
            let _ = writeln!(out, "{sym} {:?} {:?} {:?}", p[0], p[1], p[2]);
        }
    }
    out
}
