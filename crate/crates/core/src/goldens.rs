//! Byte-exact golden dumps of the pinned symbolic artifacts.
//!
//! Every golden file is a list of sections, one per artifact, each section
//! holding the canonical term list of one polynomial, one term per line.
//! Emission is deterministic, so regenerating over an up-to-date tree is a
//! no-op and `check` can compare bytes. A divergence is reported as the
//! first line where the stored file and the engine part ways, which for a
//! polynomial section is the first divergent term.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use crate::grammar;
use crate::normalform;
use crate::xieta::{self, Convention};
use crate::{gens, StarkError};

/// Directory the checked-in goldens live in.
pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("goldens")
}

fn term_lines(p: &crate::Poly) -> Vec<String> {
    let emitted = grammar::emit(p);
    emitted
        .replace(" - ", " + -")
        .split(" + ")
        .map(str::to_string)
        .collect()
}

fn render(sections: &[(&str, crate::Poly)]) -> String {
    let mut out = String::new();
    for (name, poly) in sections {
        out.push_str("= ");
        out.push_str(name);
        out.push('\n');
        for term in term_lines(poly) {
            out.push_str(&term);
            out.push('\n');
        }
    }
    out
}

/// The golden files as (file name, rendered content) pairs.
pub fn files() -> Vec<(&'static str, String)> {
    let t = gens::table();
    let inv = crate::space::invariant();

    let mut generators: Vec<(&str, crate::Poly)> = inv.names()[..inv.n_main()]
        .iter()
        .map(|&n| (n, t.get(n).clone()))
        .collect();
    generators.push(("hamiltonian", gens::hamiltonian_canonical()));

    let first = normalform::first_stage();
    let generating = vec![
        ("generator", first.generator.clone()),
        ("reference-generator", first.reference_generator.clone()),
    ];

    let second = normalform::second_order();
    let normal_forms = vec![
        ("nf1", first.nf1.clone()),
        ("nf1-on-orbit", first.nf1_on_orbit.clone()),
        ("nf2", second.nf2.clone()),
        ("reference-nf2", second.reference_nf2.clone()),
        ("order-two-total", second.total.clone()),
        ("reference-order-two-total", second.reference_total.clone()),
    ];

    let stage = normalform::second_stage();
    let second_stage = vec![
        ("restricted", stage.restricted.clone()),
        ("level-display", stage.level_display.clone()),
        ("dropped-constant", stage.dropped_constant.clone()),
        ("bracket-content", stage.t_poly.clone()),
        ("rescaled", stage.rescaled.clone()),
        ("on-sphere", stage.on_sphere.clone()),
        ("reference-on-sphere", stage.reference_on_sphere.clone()),
    ];

    let relations: Vec<(&str, crate::Poly)> = gens::relations()
        .iter()
        .map(|rel| (rel.name, rel.lhs.sub(&rel.rhs)))
        .collect();

    let flow = xieta::reduced_model(Convention::FlowDisplay);
    let definition = xieta::reduced_model(Convention::DefinitionDisplay);
    let mut reduced = vec![
        ("flow-full", flow.full.clone()),
        ("flow-constant", flow.dropped_constant.clone()),
        ("flow-vertical", flow.hamiltonian.clone()),
    ];
    for (name, rhs) in &flow.equations {
        reduced.push((*name, rhs.clone()));
    }
    reduced.push(("definition-full", definition.full.clone()));
    reduced.push(("definition-constant", definition.dropped_constant.clone()));
    reduced.push(("definition-vertical", definition.hamiltonian.clone()));

    vec![
        ("generators.txt", render(&generators)),
        ("relations.txt", render(&relations)),
        ("generating-function.txt", render(&generating)),
        ("normal-forms.txt", render(&normal_forms)),
        ("second-stage.txt", render(&second_stage)),
        ("reduced-model.txt", render(&reduced)),
    ]
}

/// Write every golden file into `dir`, creating it if needed.
pub fn emit(dir: &Path) -> Result<Vec<PathBuf>, StarkError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, content) in files() {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}

/// Outcome of comparing one golden file against the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoldenStatus {
    Match,
    Missing,
    /// First divergent line, 1-based, with both sides; a side that ran out
    /// of lines reads "<end of file>".
    Differs {
        line: usize,
        stored: String,
        engine: String,
    },
}

#[derive(Debug, Clone)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub status: GoldenStatus,
}

impl GoldenCheck {
    pub fn ok(&self) -> bool {
        self.status == GoldenStatus::Match
    }
}

impl std::fmt::Display for GoldenCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.status {
            GoldenStatus::Match => write!(f, "{}: up to date", self.name),
            GoldenStatus::Missing => write!(f, "{}: missing (run emit)", self.name),
            GoldenStatus::Differs { line, stored, engine } => write!(
                f,
                "{}: diverges at line {line}: stored '{stored}', engine '{engine}'",
                self.name
            ),
        }
    }
}

fn first_divergence(stored: &str, engine: &str) -> GoldenStatus {
    let mut s = stored.lines();
    let mut e = engine.lines();
    let mut line = 0usize;
    loop {
        line += 1;
        match (s.next(), e.next()) {
            (None, None) => return GoldenStatus::Match,
            (a, b) if a == b => continue,
            (a, b) => {
                return GoldenStatus::Differs {
                    line,
                    stored: a.unwrap_or("<end of file>").to_string(),
                    engine: b.unwrap_or("<end of file>").to_string(),
                }
            }
        }
    }
}

/// Compare every golden file in `dir` against the engine, byte for byte.
pub fn check(dir: &Path) -> Result<Vec<GoldenCheck>, StarkError> {
    let mut out = Vec::new();
    for (name, content) in files() {
        let status = match fs::read_to_string(dir.join(name)) {
            Ok(stored) if stored == content => GoldenStatus::Match,
            Ok(stored) => first_divergence(&stored, &content),
            Err(e) if e.kind() == ErrorKind::NotFound => GoldenStatus::Missing,
            Err(e) => return Err(e.into()),
        };
        out.push(GoldenCheck { name, status });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("stark-goldens-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn emit_then_check_round_trips() {
        let dir = scratch("roundtrip");
        let written = emit(&dir).unwrap();
        assert_eq!(written.len(), files().len());
        assert!(check(&dir).unwrap().iter().all(GoldenCheck::ok));
        // Regeneration over an up-to-date tree changes nothing.
        emit(&dir).unwrap();
        assert!(check(&dir).unwrap().iter().all(GoldenCheck::ok));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn a_divergent_term_is_located() {
        let dir = scratch("divergent");
        emit(&dir).unwrap();
        let path = dir.join("normal-forms.txt");
        let stored = fs::read_to_string(&path).unwrap();
        let broken = stored.replacen("H2", "3*H2", 1);
        fs::write(&path, broken).unwrap();

        let checks = check(&dir).unwrap();
        let bad: Vec<&GoldenCheck> = checks.iter().filter(|c| !c.ok()).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].name, "normal-forms.txt");
        match &bad[0].status {
            GoldenStatus::Differs { line, stored, engine } => {
                assert_eq!(*line, 2, "the first term of the first section moved");
                assert_eq!(stored, "3*H2");
                assert_eq!(engine, "H2");
            }
            other => panic!("expected a divergence, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_files_are_reported_not_fatal() {
        let dir = scratch("missing");
        fs::create_dir_all(&dir).unwrap();
        let checks = check(&dir).unwrap();
        assert!(checks.iter().all(|c| c.status == GoldenStatus::Missing));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn a_truncated_file_points_at_its_end() {
        let dir = scratch("truncated");
        emit(&dir).unwrap();
        let path = dir.join("generating-function.txt");
        let stored = fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = stored.lines().take(3).collect();
        fs::write(&path, format!("{}\n", cut.join("\n"))).unwrap();
        let checks = check(&dir).unwrap();
        let bad = checks.iter().find(|c| !c.ok()).unwrap();
        match &bad.status {
            GoldenStatus::Differs { line, stored, .. } => {
                assert_eq!(*line, 4);
                assert_eq!(stored, "<end of file>");
            }
            other => panic!("expected a divergence, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    #[ignore = "writes the committed goldens; run by hand after an intentional change"]
    fn regenerate_the_committed_goldens() {
        emit(&default_dir()).unwrap();
    }

    #[test]
    fn the_committed_goldens_are_current() {
        let checks = check(&default_dir()).unwrap();
        for c in &checks {
            assert!(c.ok(), "{c}");
        }
    }
}
