use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub const fn new(filters: usize, kernel: usize, stride: usize) -> Self {
        ConvSpec { filters, kernel, stride }
    }

    fn out_len(&self, len: usize) -> Option<usize> {
        if self.kernel == 0 || self.stride == 0 || len < self.kernel {
            return None;
        }
        Some((len - self.kernel) / self.stride + 1)
    }
}

/// Pixel-control head geometry: the recurrent output feeds a ReLU layer reshaped to
/// `grid x channels`, then a transposed convolution produces the per-region Q map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PcSpec {
    pub channels: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub fc: usize,
    pub recurrent: usize,
    pub unroll: usize,
    pub actions: usize,
    pub pc: PcSpec,
}

/// Derived layer sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub c1_h: usize,
    pub c1_w: usize,
    pub c2_h: usize,
    pub c2_w: usize,
    /// Flattened conv2 feature length.
    pub features: usize,
    pub pc_h: usize,
    pub pc_w: usize,
    pub pc_hidden: usize,
}

impl NetworkConfig {
    /// 84x84 input, 16 8x8 and 32 4x4 filters, 256-unit fc and LSTM, 20-step unroll, 7x7 pixel control.
    pub fn paper(actions: usize) -> Self {
        NetworkConfig {
            input_height: 84,
            input_width: 84,
            conv1: ConvSpec::new(16, 8, 4),
            conv2: ConvSpec::new(32, 4, 2),
            fc: 256,
            recurrent: 256,
            unroll: 20,
            actions,
            pc: PcSpec { channels: 32, grid_h: 4, grid_w: 4, kernel: 4, stride: 1 },
        }
    }

    /// Desk-scale profile: 21x21 input, 3x3 pixel-control grid.
    pub fn small(actions: usize) -> Self {
        NetworkConfig {
            input_height: 21,
            input_width: 21,
            conv1: ConvSpec::new(8, 5, 2),
            conv2: ConvSpec::new(16, 3, 2),
            fc: 64,
            recurrent: 64,
            unroll: 20,
            actions,
            pc: PcSpec { channels: 8, grid_h: 2, grid_w: 2, kernel: 2, stride: 1 },
        }
    }

    /// Gradient-check profile: 8x8 input, 2 filters per conv, 8-unit fc and LSTM.
    pub fn tiny(actions: usize) -> Self {
        NetworkConfig {
            input_height: 8,
            input_width: 8,
            conv1: ConvSpec::new(2, 4, 2),
            conv2: ConvSpec::new(2, 2, 1),
            fc: 8,
            recurrent: 8,
            unroll: 20,
            actions,
            pc: PcSpec { channels: 2, grid_h: 1, grid_w: 1, kernel: 2, stride: 1 },
        }
    }

    pub fn profile(name: &str, actions: usize) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper(actions)),
            "small" => Some(Self::small(actions)),
            "tiny" => Some(Self::tiny(actions)),
            _ => None,
        }
    }

    pub fn geometry(&self) -> Result<Geometry, NetError> {
        let bad = |what: &str| NetError::Config(what.to_string());
        if self.actions == 0 || self.fc == 0 || self.recurrent == 0 || self.unroll == 0 {
            return Err(bad("actions, fc, recurrent and unroll must be positive"));
        }
        if self.conv1.filters == 0 || self.conv2.filters == 0 || self.pc.channels == 0 {
            return Err(bad("filter and channel counts must be positive"));
        }
        let c1_h = self.conv1.out_len(self.input_height).ok_or_else(|| bad("conv1 does not fit input height"))?;
        let c1_w = self.conv1.out_len(self.input_width).ok_or_else(|| bad("conv1 does not fit input width"))?;
        let c2_h = self.conv2.out_len(c1_h).ok_or_else(|| bad("conv2 does not fit conv1 output"))?;
        let c2_w = self.conv2.out_len(c1_w).ok_or_else(|| bad("conv2 does not fit conv1 output"))?;
        let pc = &self.pc;
        if pc.grid_h == 0 || pc.grid_w == 0 || pc.kernel == 0 || pc.stride == 0 {
            return Err(bad("pixel-control geometry must be positive"));
        }
        let pc_h = (pc.grid_h - 1) * pc.stride + pc.kernel;
        let pc_w = (pc.grid_w - 1) * pc.stride + pc.kernel;
        if self.input_height % pc_h != 0 || self.input_width % pc_w != 0 {
            return Err(bad("pixel-control output must divide the input dimensions"));
        }
        Ok(Geometry {
            c1_h,
            c1_w,
            c2_h,
            c2_w,
            features: c2_h * c2_w * self.conv2.filters,
            pc_h,
            pc_w,
            pc_hidden: pc.grid_h * pc.grid_w * pc.channels,
        })
    }

    /// Canonical one-line description; the checkpoint fingerprint is computed from it.
    pub fn canonical(&self) -> String {
        format!(
            "input={}x{} conv1={}/{}/{} conv2={}/{}/{} fc={} recurrent={} unroll={} actions={} pc={}/{}x{}/{}/{}",
            self.input_height,
            self.input_width,
            self.conv1.filters,
            self.conv1.kernel,
            self.conv1.stride,
            self.conv2.filters,
            self.conv2.kernel,
            self.conv2.stride,
            self.fc,
            self.recurrent,
            self.unroll,
            self.actions,
            self.pc.channels,
            self.pc.grid_h,
            self.pc.grid_w,
            self.pc.kernel,
            self.pc.stride,
        )
    }

    pub fn parse_canonical(text: &str) -> Option<NetworkConfig> {
        let mut fields = std::collections::HashMap::new();
        for part in text.split_whitespace() {
            let (k, v) = part.split_once('=')?;
            fields.insert(k, v);
        }
        let nums = |s: &str, sep: &[char]| -> Option<Vec<usize>> {
            s.split(sep).map(|x| x.parse().ok()).collect()
        };
        let input = nums(fields.get("input")?, &['x'])?;
        let c1 = nums(fields.get("conv1")?, &['/'])?;
        let c2 = nums(fields.get("conv2")?, &['/'])?;
        let pc = nums(fields.get("pc")?, &['/', 'x'])?;
        if input.len() != 2 || c1.len() != 3 || c2.len() != 3 || pc.len() != 5 {
            return None;
        }
        let cfg = NetworkConfig {
            input_height: input[0],
            input_width: input[1],
            conv1: ConvSpec::new(c1[0], c1[1], c1[2]),
            conv2: ConvSpec::new(c2[0], c2[1], c2[2]),
            fc: fields.get("fc")?.parse().ok()?,
            recurrent: fields.get("recurrent")?.parse().ok()?,
            unroll: fields.get("unroll")?.parse().ok()?,
            actions: fields.get("actions")?.parse().ok()?,
            pc: PcSpec { channels: pc[0], grid_h: pc[1], grid_w: pc[2], kernel: pc[3], stride: pc[4] },
        };
        (cfg.canonical() == text.trim()).then_some(cfg)
    }

    /// FNV-1a over the canonical description.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
