use serde::{Deserialize, Serialize};

use super::{
    build_wmc_polynomial, enumerate_stable_models, ground, ChoiceKind, GroundError, GroundProgram,
    StableModel, WmcPolynomial,
};
use crate::lang::{SignalType, SourceInfo, TypedProgram};

/// One weighted variable of a compiled target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSource {
    /// Source atom, or the comparison text for a virtual source.
    pub name: String,
    /// Channel of the underlying signal (left operand for comparisons).
    pub channel: String,
    #[serde(rename = "type")]
    pub dtype: SignalType,
    pub kind: ChoiceKind,
    /// Whether any model uses the negated literal.
    pub negated: bool,
}

/// Serializable result of compiling one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledTarget {
    pub target: String,
    pub channel: String,
    /// Every declared signal; `kind` indices refer into this table.
    pub signals: Vec<SourceInfo>,
    pub sources: Vec<CompiledSource>,
    /// Character `i` is the value of `sources[i]`.
    pub models: Vec<String>,
    pub polynomial: String,
    pub ground_program: String,
}

impl CompiledTarget {
    pub fn stable_models(&self) -> Vec<StableModel> {
        self.models
            .iter()
            .map(|m| StableModel::from_bitstring(m).expect("model bitstrings are 0/1"))
            .collect()
    }

    /// Models as literal sets, e.g. `{a, b, ¬c}`.
    pub fn model_sets(&self) -> Vec<String> {
        self.models
            .iter()
            .map(|m| {
                let lits: Vec<String> = m
                    .chars()
                    .zip(&self.sources)
                    .map(|(bit, s)| match bit {
                        '1' => s.name.clone(),
                        _ => format!("¬{}", s.name),
                    })
                    .collect();
                format!("{{{}}}", lits.join(", "))
            })
            .collect()
    }

    pub fn variables(&self) -> Vec<String> {
        self.sources.iter().map(|s| s.name.clone()).collect()
    }

    pub fn wmc_polynomial(&self) -> WmcPolynomial {
        build_wmc_polynomial(self.variables(), &self.stable_models())
    }

    /// Indices into `signals` that feed this target.
    pub fn input_signals(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .sources
            .iter()
            .flat_map(|s| match &s.kind {
                ChoiceKind::Source(i) => vec![*i],
                ChoiceKind::Comparison(c) => match c.rhs {
                    super::Operand::Source(r) => vec![c.lhs, r],
                    super::Operand::Const(_) => vec![c.lhs],
                },
            })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn compile_target(gp: &GroundProgram, limit: usize) -> Result<CompiledTarget, GroundError> {
    let models = enumerate_stable_models(gp, limit)?;
    let poly = build_wmc_polynomial(gp.choice_names(), &models);
    let sources = gp
        .choices
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let signal = match &c.kind {
                ChoiceKind::Source(s) => *s,
                ChoiceKind::Comparison(site) => site.lhs,
            };
            CompiledSource {
                name: c.name.clone(),
                channel: gp.sources[signal].channel.clone(),
                dtype: gp.sources[signal].dtype,
                kind: c.kind.clone(),
                negated: poly.uses_negation(i),
            }
        })
        .collect();
    Ok(CompiledTarget {
        target: gp.target_info.atom.to_string(),
        channel: gp.target_info.channel.clone(),
        signals: gp.sources.clone(),
        sources,
        models: models.iter().map(|m| m.bitstring()).collect(),
        polynomial: poly.to_string(),
        ground_program: gp.to_string(),
    })
}

/// Grounds and compiles every target of a program.
pub fn compile(tp: &TypedProgram, limit: usize) -> Result<Vec<CompiledTarget>, GroundError> {
    ground(tp)?
        .iter()
        .map(|gp| compile_target(gp, limit))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::check;

    #[test]
    fn d_program_artifact() {
        let tp = check(super::super::tests::D_PROGRAM).unwrap();
        let out = compile(&tp, 24).unwrap();
        assert_eq!(out.len(), 1);
        let t = &out[0];
        assert_eq!(t.models.len(), 2);
        assert_eq!(t.channel, "/d");
        assert_eq!(t.model_sets(), vec!["{a, b, ¬c}", "{¬a, b, c}"]);
        let flags: Vec<bool> = t.sources.iter().map(|s| s.negated).collect();
        assert_eq!(flags, vec![true, false, true]);
        let json = serde_json::to_string(t).unwrap();
        let back: CompiledTarget = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, t);
        assert_eq!(back.wmc_polynomial().to_string(), t.polynomial);
    }

    #[test]
    fn unrelated_source_is_left_out() {
        let with_extra = format!(
            "{}\ne <- source(\"/e\", Probability).\nf if e.\nf -> target(\"/f\").",
            super::super::tests::D_PROGRAM
        );
        let base = compile(&check(super::super::tests::D_PROGRAM).unwrap(), 24).unwrap();
        let out = compile(&check(&with_extra).unwrap(), 24).unwrap();
        let d = out.iter().find(|t| t.channel == "/d").unwrap();
        assert_eq!(d.variables(), base[0].variables());
        assert_eq!(d.models, base[0].models);
    }

    #[test]
    fn positive_only_source_has_no_negation_flag() {
        let tp = check(
            r#"a <- source("/a", Probability).
               b <- source("/b", Probability).
               p if a.
               p if b.
               p -> target("/p")."#,
        )
        .unwrap();
        let t = &compile(&tp, 24).unwrap()[0];
        // Models {a}, {b}, {a,b} mention both signs of each source.
        assert_eq!(t.models, vec!["10", "01", "11"]);
        assert!(t.sources[0].negated);
        let tp = check(
            r#"a <- source("/a", Probability).
               p if a.
               p -> target("/p")."#,
        )
        .unwrap();
        assert!(!compile(&tp, 24).unwrap()[0].sources[0].negated);
    }
}
