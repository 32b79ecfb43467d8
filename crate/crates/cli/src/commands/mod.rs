mod flow;
mod front;
mod genfun_check;
mod validate;

pub use flow::cmd_flow;
pub use front::cmd_front;
pub use genfun_check::cmd_genfun_check;
pub use validate::cmd_validate;

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Names of the checks that exceeded their tolerance.
    Fail(Vec<String>),
}

impl Outcome {
    pub fn from_failures(failed: Vec<String>) -> Self {
        if failed.is_empty() {
            Outcome::Pass
        } else {
            Outcome::Fail(failed)
        }
    }
}

pub(crate) fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
