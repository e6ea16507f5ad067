use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::{join, KeyValues};

/// One convolution block: `out_channels:kernel:stride:padding`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvBlockConfig {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvBlockConfig {
    pub const fn new(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        ConvBlockConfig {
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        let padded = input_len + 2 * self.padding;
        (self.stride > 0 && self.kernel > 0 && padded >= self.kernel)
            .then(|| (padded - self.kernel) / self.stride + 1)
    }
}

impl fmt::Display for ConvBlockConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.out_channels, self.kernel, self.stride, self.padding
        )
    }
}

impl FromStr for ConvBlockConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("conv block {s:?}: expected out:kernel:stride:padding")))?;
        match parts[..] {
            [out_channels, kernel, stride, padding] => Ok(ConvBlockConfig {
                out_channels,
                kernel,
                stride,
                padding,
            }),
            _ => Err(Error::Config(format!(
                "conv block {s:?}: expected out:kernel:stride:padding"
            ))),
        }
    }
}

/// Architecture of the network.
///
/// The default lands at 987,317 parameters: three gated conv blocks
/// (10→64 K5, 64→128 K3, 128→128 K3), a GRU with 447 hidden units, a
/// 256-unit dense layer and a 53-way head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub window_len: usize,
    pub conv_blocks: Vec<ConvBlockConfig>,
    pub gru_hidden: usize,
    pub dense_hidden: usize,
    pub num_classes: usize,
    pub seed: u64,
}

pub const DEFAULT_GRU_HIDDEN: usize = 447;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_channels: 10,
            window_len: 20,
            conv_blocks: vec![
                ConvBlockConfig::new(64, 5, 1, 2),
                ConvBlockConfig::new(128, 3, 1, 1),
                ConvBlockConfig::new(128, 3, 1, 1),
            ],
            gru_hidden: DEFAULT_GRU_HIDDEN,
            dense_hidden: 256,
            num_classes: 53,
            seed: 42,
        }
    }
}

impl ModelConfig {
    /// Checks the structural constraints and returns the sequence length
    /// seen by the GRU.
    pub fn validate(&self) -> Result<usize> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be ≥ 2, got {}",
                self.num_classes
            )));
        }
        if self.conv_blocks.is_empty() {
            return Err(Error::Config("at least one conv block is required".into()));
        }
        let positive = [
            ("input_channels", self.input_channels),
            ("window_len", self.window_len),
            ("gru_hidden", self.gru_hidden),
            ("dense_hidden", self.dense_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be ≥ 1")));
        }
        let mut len = self.window_len;
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel == 0 || b.stride == 0 {
                return Err(Error::Config(format!(
                    "conv block {i} ({b}): channels, kernel and stride must be ≥ 1"
                )));
            }
            let out = b.output_len(len).ok_or_else(|| {
                Error::Config(format!(
                    "conv block {i} ({b}) produces no output for length {len}"
                ))
            })?;
            // the gated skip adds the block input to its output
            if out != len {
                return Err(Error::Config(format!(
                    "conv block {i} ({b}) maps length {len} to {out}; gated skips need equal lengths"
                )));
            }
            len = out;
        }
        Ok(len)
    }

    pub fn conv_output_channels(&self) -> usize {
        self.conv_blocks.last().map_or(self.input_channels, |b| b.out_channels)
    }

    /// Parameter count computed from the configuration alone.
    pub fn param_count(&self) -> usize {
        let mut total = 0;
        let mut c_in = self.input_channels;
        for b in &self.conv_blocks {
            let c_out = b.out_channels;
            total += c_out * c_in * b.kernel + c_out; // conv
            total += c_out; // gate
            if c_in != c_out {
                total += c_out * c_in + c_out; // 1×1 projection
            }
            c_in = c_out;
        }
        let (h, i) = (self.gru_hidden, c_in);
        total += 3 * (h * i + h * h + h);
        total += self.dense_hidden * h + self.dense_hidden;
        total += self.num_classes * self.dense_hidden + self.num_classes;
        total
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("input_channels", self.input_channels);
        kv.set("window_len", self.window_len);
        kv.set("conv_blocks", join(&self.conv_blocks));
        kv.set("gru_hidden", self.gru_hidden);
        kv.set("dense_hidden", self.dense_hidden);
        kv.set("num_classes", self.num_classes);
        kv.set("seed", self.seed);
    }

    /// Consumes the architecture keys from `kv`; absent keys take defaults.
    pub fn take_from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = ModelConfig::default();
        let conv_blocks = kv.take_list::<ConvBlockConfig>("conv_blocks")?;
        let cfg = ModelConfig {
            input_channels: kv.take_parsed("input_channels", d.input_channels)?,
            window_len: kv.take_parsed("window_len", d.window_len)?,
            conv_blocks: conv_blocks.unwrap_or(d.conv_blocks),
            gru_hidden: kv.take_parsed("gru_hidden", d.gru_hidden)?,
            dense_hidden: kv.take_parsed("dense_hidden", d.dense_hidden)?,
            num_classes: kv.take_parsed("num_classes", d.num_classes)?,
            seed: kv.take_parsed("seed", d.seed)?,
        };
        Ok(cfg)
    }
}
