use crate::domaingen::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::ranker::{LossSpec, RankerConfig, RankerModel, Supervision, TrainOptions, TrainReport, Trainer};

/// Trains the teacher on fully observed source rows only.
pub fn train_teacher(
    source: &Dataset,
    config: &RankerConfig,
    opts: &TrainOptions,
) -> Result<(RankerModel, TrainReport)> {
    config.validate()?;
    if config.heads.iter().any(|h| h.aux_distill()) {
        return Err(Error::Config("the teacher has no auxiliary units".into()));
    }
    if let Some(ex) = source
        .examples
        .iter()
        .find(|e| e.domain != Domain::Source || e.mask.iter().any(|m| !m))
    {
        return Err(Error::Data(format!(
            "teacher training needs fully observed source rows; row {} is not",
            ex.row_id
        )));
    }
    let mut model = RankerModel::init(config)?;
    let report = Trainer::new(opts.clone(), LossSpec::default(), Supervision::Control)
        .with_domain_guard(Domain::Source)
        .train(&mut model, source)?;
    Ok((model, report))
}
