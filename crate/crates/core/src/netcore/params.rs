use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;
use super::NetError;

/// Parameter blocks, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamId {
    Conv1W,
    Conv1B,
    Conv2W,
    Conv2B,
    FcW,
    FcB,
    LstmWx,
    LstmWh,
    LstmB,
    PolicyW,
    PolicyB,
    ValueW,
    ValueB,
    RpW,
    RpB,
    PcFcW,
    PcFcB,
    PcDeconvW,
    PcDeconvB,
}

impl ParamId {
    pub const ALL: [ParamId; 19] = [
        ParamId::Conv1W,
        ParamId::Conv1B,
        ParamId::Conv2W,
        ParamId::Conv2B,
        ParamId::FcW,
        ParamId::FcB,
        ParamId::LstmWx,
        ParamId::LstmWh,
        ParamId::LstmB,
        ParamId::PolicyW,
        ParamId::PolicyB,
        ParamId::ValueW,
        ParamId::ValueB,
        ParamId::RpW,
        ParamId::RpB,
        ParamId::PcFcW,
        ParamId::PcFcB,
        ParamId::PcDeconvW,
        ParamId::PcDeconvB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Conv1W => "conv1.weight",
            ParamId::Conv1B => "conv1.bias",
            ParamId::Conv2W => "conv2.weight",
            ParamId::Conv2B => "conv2.bias",
            ParamId::FcW => "fc.weight",
            ParamId::FcB => "fc.bias",
            ParamId::LstmWx => "lstm.weight_input",
            ParamId::LstmWh => "lstm.weight_hidden",
            ParamId::LstmB => "lstm.bias",
            ParamId::PolicyW => "policy.weight",
            ParamId::PolicyB => "policy.bias",
            ParamId::ValueW => "value.weight",
            ParamId::ValueB => "value.bias",
            ParamId::RpW => "reward_prediction.weight",
            ParamId::RpB => "reward_prediction.bias",
            ParamId::PcFcW => "pixel_control.fc.weight",
            ParamId::PcFcB => "pixel_control.fc.bias",
            ParamId::PcDeconvW => "pixel_control.deconv.weight",
            ParamId::PcDeconvB => "pixel_control.deconv.bias",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn is_bias(self) -> bool {
        matches!(
            self,
            ParamId::Conv1B
                | ParamId::Conv2B
                | ParamId::FcB
                | ParamId::LstmB
                | ParamId::PolicyB
                | ParamId::ValueB
                | ParamId::RpB
                | ParamId::PcFcB
                | ParamId::PcDeconvB
        )
    }
}

/// Shape and fan-in of every block.
pub fn layout(config: &NetworkConfig) -> Result<Vec<(ParamId, Vec<usize>, usize)>, NetError> {
    let g = config.geometry()?;
    let c = config;
    let (c1, c2) = (c.conv1, c.conv2);
    let r = c.recurrent;
    let a = c.actions;
    let pc = c.pc;
    let fan_c1 = c1.kernel * c1.kernel * 3;
    let fan_c2 = c2.kernel * c2.kernel * c1.filters;
    let fan_deconv = pc.kernel * pc.kernel * pc.channels;
    Ok(vec![
        (ParamId::Conv1W, vec![c1.filters, c1.kernel, c1.kernel, 3], fan_c1),
        (ParamId::Conv1B, vec![c1.filters], fan_c1),
        (ParamId::Conv2W, vec![c2.filters, c2.kernel, c2.kernel, c1.filters], fan_c2),
        (ParamId::Conv2B, vec![c2.filters], fan_c2),
        (ParamId::FcW, vec![c.fc, g.features], g.features),
        (ParamId::FcB, vec![c.fc], g.features),
        (ParamId::LstmWx, vec![4 * r, c.fc], c.fc + r),
        (ParamId::LstmWh, vec![4 * r, r], c.fc + r),
        (ParamId::LstmB, vec![4 * r], c.fc + r),
        (ParamId::PolicyW, vec![a, r], r),
        (ParamId::PolicyB, vec![a], r),
        (ParamId::ValueW, vec![1, r], r),
        (ParamId::ValueB, vec![1], r),
        (ParamId::RpW, vec![3, 3 * g.features], 3 * g.features),
        (ParamId::RpB, vec![3], 3 * g.features),
        (ParamId::PcFcW, vec![g.pc_hidden, r], r),
        (ParamId::PcFcB, vec![g.pc_hidden], r),
        (ParamId::PcDeconvW, vec![a, pc.kernel, pc.kernel, pc.channels], fan_deconv),
        (ParamId::PcDeconvB, vec![a], fan_deconv),
    ])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub id: ParamId,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All weights and biases of one network. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub config: NetworkConfig,
    tensors: Vec<Tensor>,
}

impl Parameters {
    pub fn zeros(config: &NetworkConfig) -> Result<Parameters, NetError> {
        let tensors = layout(config)?
            .into_iter()
            .map(|(id, shape, _)| {
                let n = shape.iter().product();
                Tensor { id, shape, data: vec![0.0; n] }
            })
            .collect();
        Ok(Parameters { config: *config, tensors })
    }

    /// Fan-in scaled uniform weights in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; biases start at zero.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Parameters, NetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Parameters::zeros(config)?;
        for ((id, _, fan_in), t) in layout(config)?.into_iter().zip(p.tensors.iter_mut()) {
            if id.is_bias() {
                continue;
            }
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in t.data.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Parameters {
        Parameters {
            config: self.config,
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor { id: t.id, shape: t.shape.clone(), data: vec![0.0; t.data.len()] })
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.tensors[id.index()].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.tensors[id.index()].data
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.index()]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Parameters, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_tensors(config: NetworkConfig, tensors: Vec<Tensor>) -> Parameters {
        Parameters { config, tensors }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let c = NetworkConfig::tiny(5);
        assert_eq!(Parameters::init(&c, 3).unwrap(), Parameters::init(&c, 3).unwrap());
        assert_ne!(Parameters::init(&c, 3).unwrap(), Parameters::init(&c, 4).unwrap());
    }

    #[test]
    fn paper_conv1_shape() {
        let p = Parameters::init(&NetworkConfig::paper(5), 0).unwrap();
        assert_eq!(p.tensor(ParamId::Conv1W).shape, vec![16, 8, 8, 3]);
        assert_eq!(p.tensor(ParamId::Conv2W).shape, vec![32, 4, 4, 16]);
        assert_eq!(p.tensor(ParamId::LstmWh).shape, vec![1024, 256]);
    }

    #[test]
    fn init_bounded_by_fan_in() {
        let c = NetworkConfig::small(3);
        let p = Parameters::init(&c, 11).unwrap();
        assert!(p.is_finite());
        for ((id, shape, fan), t) in layout(&c).unwrap().into_iter().zip(p.tensors()) {
            assert_eq!(shape, t.shape);
            let bound = 1.0 / (fan as f64).sqrt();
            assert!(t.data.iter().all(|v| v.abs() <= bound), "{}", id.name());
            if id.is_bias() {
                assert!(t.data.iter().all(|&v| v == 0.0));
            }
        }
    }
}
