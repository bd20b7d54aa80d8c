//! Task bundles with executable verifiers, and the filter that vets them.

mod bundle;
mod filter;
mod lint;
mod validate;

pub use bundle::{answer_value, read_jsonl, write_jsonl, BundleIoError, CatBundle, ParsedBundle, MIN_FAILURES};
pub use filter::{difficulty, filter_batch, render_histogram, FilterOutput, FilterStats};
pub use lint::{is_id_like, missing_ids};
pub use validate::{classify_verify, CheckSummary, RejectClass, Status, Validator, Variant, Verdict, VerifyResult};
