//! Abstract executions recorded from traces, and the checks run on them.

pub mod check;
pub mod noninterference;
pub mod record;
pub mod relation;

pub use check::{check_ec, check_sc, EcError, EcVerdict, ScVerdict};
pub use noninterference::{
    check_noninterference, con_observation, low_equivalent, NifError, NifVerdict, Observation,
};
pub use record::{record, AbstractExecution, Operation, RecordError, Rval};
pub use relation::Relation;

use crate::syntax::label::Label;

pub fn project_con(exec: &AbstractExecution) -> AbstractExecution {
    exec.project(Label::Con)
}

pub fn project_ava(exec: &AbstractExecution) -> AbstractExecution {
    exec.project(Label::Ava)
}
