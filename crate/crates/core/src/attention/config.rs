use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoder dimensions. `n_q` queries, each regressing `n_p` points and
/// sampling `n_off` offsets around every point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub n_q: usize,
    pub n_p: usize,
    pub n_off: usize,
    /// Query embedding width.
    pub d: usize,
    pub layers: usize,
    pub ffn_dim: usize,
    /// Channels of the BEV raster fed to the value projection.
    pub bev_channels: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self { n_q: 100, n_p: 20, n_off: 1, d: 256, layers: 6, ffn_dim: 512, bev_channels: 256 }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("n_q", self.n_q),
            ("n_p", self.n_p),
            ("n_off", self.n_off),
            ("d", self.d),
            ("layers", self.layers),
            ("ffn_dim", self.ffn_dim),
            ("bev_channels", self.bev_channels),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("attention config `{name}` must be positive")));
            }
        }
        Ok(())
    }

    /// Attention slots per query per layer.
    pub fn slots(&self) -> usize {
        self.n_p * self.n_off
    }
}
