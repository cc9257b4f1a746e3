use clap::ValueEnum;
use cxnprobe::datasets::DatasetKind;
use cxnprobe::evals::{
    eval_cc_schematic, eval_cec_auc, eval_fixed_slots, eval_idioms, eval_multithat, eval_npn,
    EvalScore,
};
use cxnprobe::gateway::Gateway;
use cxnprobe::tagger::{TaggerMode, TaggerPolicy};

use crate::data::Inputs;
use crate::error::CliError;
use crate::gateway;
use crate::run::{Run, ScoreSink, SCORES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    Cec,
    Multithat,
    Idioms,
    Cogs,
    Npn,
    Cc,
    All,
}

impl EvalKind {
    /// Evaluation order for `all`, matching table column order.
    const EVERY: [EvalKind; 6] = [
        EvalKind::Cec,
        EvalKind::Multithat,
        EvalKind::Idioms,
        EvalKind::Cogs,
        EvalKind::Cc,
        EvalKind::Npn,
    ];

    fn expand(self) -> Vec<EvalKind> {
        match self {
            EvalKind::All => Self::EVERY.to_vec(),
            k => vec![k],
        }
    }
}

fn eval_one(
    kind: EvalKind,
    run: &Run,
    gw: &dyn Gateway,
    common: &[&dyn Gateway],
    inputs: &mut Inputs,
) -> Result<Vec<EvalScore>, CliError> {
    let c = &run.config;
    Ok(match kind {
        EvalKind::Cec => vec![eval_cec_auc(inputs.records(DatasetKind::Cec, common)?, gw)?],
        EvalKind::Multithat => {
            vec![eval_multithat(
                inputs.records(DatasetKind::Multithat, common)?,
                gw,
            )?]
        }
        EvalKind::Idioms => vec![eval_idioms(
            inputs.records(DatasetKind::Magpie, common)?,
            gw,
        )?],
        EvalKind::Cogs => eval_fixed_slots(
            inputs.records(DatasetKind::Cogs, common)?,
            gw,
            c.the_pooling,
        )?,
        EvalKind::Cc => {
            let policy = match c.tagger {
                TaggerMode::External => TaggerPolicy::external(),
                TaggerMode::RuleBased => TaggerPolicy::rule_based(),
            };
            let records = inputs.records(DatasetKind::Cogs, common)?;
            vec![eval_cc_schematic(
                records,
                gw,
                &policy,
                c.nucleus_q,
                c.cc_weighting,
            )?]
        }
        EvalKind::Npn => {
            let records = inputs.records(DatasetKind::Npn, common)?.to_vec();
            let counts = inputs.npn_counts()?;
            eval_npn(&records, counts, gw, c.npn_filter)?
        }
        EvalKind::All => unreachable!("expanded before dispatch"),
    })
}

pub fn run_eval(run: &mut Run, kind: EvalKind) -> Result<(), CliError> {
    let c = run.config.clone();
    let gw = gateway::open(&c.gateway, c.seed, c.parallel, c.cache_dir.as_deref())?;
    run.manifest.model = Some(gw.handshake()?);
    let mut extra = Vec::new();
    for spec in &c.common_vocab {
        let g = gateway::open(spec, c.seed, c.parallel, None)?;
        run.manifest.common_vocab_models.push(g.handshake()?);
        extra.push(g);
    }
    let mut common: Vec<&dyn Gateway> = vec![&gw];
    common.extend(extra.iter().map(|g| g as &dyn Gateway));

    let mut sink = ScoreSink::create(&run.path(SCORES))?;
    let mut inputs = Inputs::new(&c);
    let mut result = Ok(());
    for k in kind.expand() {
        match eval_one(k, run, &gw, &common, &mut inputs) {
            Ok(scores) => {
                if let Err(e) = sink.extend(scores) {
                    result = Err(e);
                    break;
                }
            }
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    // zero on a fully warm cache
    run.detail("distribution_calls", gw.inner_distribution_calls());
    let flushed = gw.flush();
    run.manifest.datasets = std::mem::take(&mut inputs.entries);
    if let Some(src) = inputs.count_source.take() {
        run.manifest.inputs.insert("npn_counts".into(), src);
    }
    run.register(SCORES)?;
    run.write_table(&sink.scores)?;
    result.and(flushed.map_err(CliError::from))
}
