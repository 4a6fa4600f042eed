use std::io::Write;

use anyhow::{bail, Context, Result};
use mtptune_core::data::load_bundle;
use mtptune_core::metrics::MetricSpec;
use mtptune_core::mtp::{
    auto_answer, infer_setting, nearest_rows, validation_setting, Answers, AutoAnswerOptions, MtpSetting,
    TargetSideInfo, ValidationSetting,
};

use crate::args::{AnswerArgs, InferArgs, TargetInfoArg};

#[derive(Debug, Clone, PartialEq)]
pub struct InferReport {
    pub answers: Answers,
    /// Matching settings in decision-table order.
    pub settings: Vec<MtpSetting>,
    pub validation: ValidationSetting,
    /// Closest rows when nothing matches: (distance, settings).
    pub nearest: Option<(usize, Vec<MtpSetting>)>,
    pub warnings: Vec<String>,
}

impl InferReport {
    pub fn new(answers: Answers) -> Self {
        let settings = infer_setting(&answers);
        let nearest = settings.is_empty().then(|| {
            let (d, rows) = nearest_rows(&answers);
            (d, rows.iter().map(|r| r.setting).collect())
        });
        let mut warnings = Vec::new();
        if answers.q1 && !answers.q3 {
            warnings.push(
                "novel instances without instance features: a one-hot instance branch cannot embed unseen ids"
                    .to_string(),
            );
        }
        if answers.q2 && answers.q4 == TargetSideInfo::No {
            warnings.push(
                "novel targets without target features: a one-hot target branch cannot embed unseen ids".to_string(),
            );
        }
        Self {
            validation: validation_setting(answers.q1, answers.q2),
            answers,
            settings,
            nearest,
            warnings,
        }
    }

    /// Setting that picks the default metric: the first match, else the
    /// first nearest row.
    pub fn primary_setting(&self) -> Option<MtpSetting> {
        self.settings
            .first()
            .or_else(|| self.nearest.as_ref().and_then(|(_, s)| s.first()))
            .copied()
    }

    pub fn summary_line(&self) -> String {
        let names = |s: &[MtpSetting]| s.iter().map(|x| x.name()).collect::<Vec<_>>().join(" | ");
        if self.settings.is_empty() {
            "no matching setting".to_string()
        } else {
            format!("{}, Setting {}", names(&self.settings), self.validation)
        }
    }

    pub fn print(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "answers     {}", self.answers)?;
        writeln!(out, "setting     {}", self.summary_line())?;
        if let Some((d, rows)) = &self.nearest {
            let names: Vec<&str> = rows.iter().map(|s| s.name()).collect();
            writeln!(
                out,
                "nearest     {} (differs in {d} answer{})",
                names.join(" | "),
                if *d == 1 { "" } else { "s" }
            )?;
        }
        writeln!(
            out,
            "validation  Setting {}: {}",
            self.validation,
            self.validation.describe()
        )?;
        if let Some(s) = self.primary_setting() {
            writeln!(out, "metric      {}", MetricSpec::for_setting(s))?;
        }
        for w in &self.warnings {
            writeln!(out, "warning     {w}")?;
        }
        Ok(())
    }
}

fn apply_overrides(mut a: Answers, o: &AnswerArgs) -> Answers {
    if let Some(v) = o.q1 {
        a.q1 = v;
    }
    if let Some(v) = o.q2 {
        a.q2 = v;
    }
    if let Some(v) = o.q3 {
        a.q3 = v;
    }
    if let Some(v) = o.q4 {
        a.q4 = v.into();
    }
    if let Some(v) = o.q5 {
        a.q5 = v;
    }
    if let Some(v) = o.q6 {
        a.q6 = v.into();
    }
    a
}

fn explicit(o: &AnswerArgs) -> Result<Answers> {
    let need = |name: &str| anyhow::anyhow!("missing --{name} (answer every question or pass --scores)");
    Ok(Answers {
        q1: o.q1.ok_or_else(|| need("q1"))?,
        q2: o.q2.ok_or_else(|| need("q2"))?,
        q3: o.q3.ok_or_else(|| need("q3"))?,
        q4: o.q4.ok_or_else(|| need("q4"))?.into(),
        q5: o.q5.ok_or_else(|| need("q5"))?,
        q6: o.q6.ok_or_else(|| need("q6"))?.into(),
    })
}

pub fn cmd_infer(args: &InferArgs, out: &mut dyn Write) -> Result<InferReport> {
    let answers = match &args.scores {
        Some(scores) => {
            let bundle = load_bundle(
                scores,
                args.instance_features.as_deref(),
                args.target_features.as_deref(),
                args.test.as_deref(),
            )?;
            let opts = AutoAnswerOptions {
                hierarchy: args.answers.q4 == Some(TargetInfoArg::Hierarchy),
                score_type: args.answers.q6.map(Into::into),
                ..AutoAnswerOptions::default()
            };
            let detected = auto_answer(&bundle.train, bundle.test.as_ref(), &opts)
                .with_context(|| format!("answering from {}", scores.display()))?;
            apply_overrides(detected, &args.answers)
        }
        None => explicit(&args.answers)?,
    };
    let report = InferReport::new(answers);
    report.print(out)?;
    if report.settings.is_empty() && report.nearest.is_none() {
        bail!("decision table is empty");
    }
    Ok(report)
}
