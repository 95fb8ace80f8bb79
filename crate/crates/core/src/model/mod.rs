//! Network components: per-view encoders with complementary and superfluous
//! heads, decoders over `[C; D^v; R^v]`, the shared cluster-assignment
//! network, the information-bottleneck Gaussian heads, and the relation
//! metric that turns the unified representation into self-expressive
//! coefficients.

mod checkpoint;
mod layers;
mod relation;
mod state;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use layers::{Dense, ParamId};
pub use relation::{fill_affinity, materialize_affinity, relation_coefficient, soft_threshold};
pub(crate) use relation::{pair_dot, sample_rows};
pub use state::{
    global_private_reps, AutoencoderPass, ClusterAssignNet, GaussianHead, IbHeads, IbOutput,
    LatentBundle, ModelShape, ModelState, RelationMetric, ViewDecoder, ViewEncoder,
    CONSISTENT_INIT_STD, LOG_VAR_MAX, LOG_VAR_MIN, THETA_INIT,
};
