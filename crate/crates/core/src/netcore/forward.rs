use std::fmt;

use super::config::{ConvSpec, Geometry, NetworkConfig};
use super::params::{ParamId, Parameters};
use super::NetError;
use crate::minidoom::Observation;

/// Number of frames the reward-prediction head looks at.
pub const RP_FRAMES: usize = 3;

/// LSTM state plus the two most recent frames (oldest first) for the reward-prediction window.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
    pub recent_frames: Vec<Observation>,
}

impl RecurrentState {
    pub fn zeros(config: &NetworkConfig) -> RecurrentState {
        RecurrentState {
            hidden: vec![0.0; config.recurrent],
            cell: vec![0.0; config.recurrent],
            recent_frames: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    Policy,
    Value,
    RewardPrediction,
    PixelControl,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Policy => "policy",
            Head::Value => "value",
            Head::RewardPrediction => "reward-prediction",
            Head::PixelControl => "pixel-control",
        })
    }
}

/// Which auxiliary heads to evaluate. Policy and value are always computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadMask {
    pub reward_prediction: bool,
    pub pixel_control: bool,
}

impl HeadMask {
    pub const ALL: HeadMask = HeadMask { reward_prediction: true, pixel_control: true };
    pub const ACTOR_CRITIC: HeadMask = HeadMask { reward_prediction: false, pixel_control: false };
    pub const PIXEL_CONTROL: HeadMask = HeadMask { reward_prediction: false, pixel_control: true };
    pub const REWARD_PREDICTION: HeadMask = HeadMask { reward_prediction: true, pixel_control: false };
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub policy: Vec<f64>,
    pub policy_logits: Vec<f64>,
    pub value: f64,
    /// Class order: zero, positive, negative reward.
    pub rp_logits: [f64; 3],
    /// Row-major `pc_h x pc_w x actions`.
    pub pc_q: Vec<f64>,
    pub next_state: RecurrentState,
}

impl ForwardOutput {
    pub fn log_policy(&self, action: usize) -> f64 {
        log_softmax(&self.policy_logits)[action]
    }

    pub fn entropy(&self) -> f64 {
        let ls = log_softmax(&self.policy_logits);
        -self.policy.iter().zip(&ls).map(|(p, l)| p * l).sum::<f64>()
    }
}

/// Gradient of a loss with respect to one step's head outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputGrad {
    pub policy_logits: Vec<f64>,
    pub value: f64,
    pub rp_logits: [f64; 3],
    pub pc_q: Vec<f64>,
}

impl OutputGrad {
    pub fn zeros(config: &NetworkConfig) -> OutputGrad {
        let (ph, pw) = config.geometry().map(|g| (g.pc_h, g.pc_w)).unwrap_or((0, 0));
        OutputGrad {
            policy_logits: vec![0.0; config.actions],
            value: 0.0,
            rp_logits: [0.0; 3],
            pc_q: vec![0.0; ph * pw * config.actions],
        }
    }
}

/// Loss value split by head, with its gradient for every step of the rollout.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub terms: Vec<(Head, f64)>,
    pub grads: Vec<OutputGrad>,
}

impl LossEval {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|(_, v)| v).sum()
    }
}

/// A differentiable scalar of the forward outputs over a rollout.
pub trait RolloutLoss {
    fn evaluate(&self, outputs: &[ForwardOutput]) -> LossEval;
}

pub(crate) fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// y = W x + b with W row-major `out x in`.
fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .zip(w.chunks_exact(n))
        .map(|(bi, row)| bi + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// Accumulates `dW += dy x^T`, `db += dy`, and optionally `dx += W^T dy`.
fn affine_backward(w: &[f64], x: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64], dx: Option<&mut [f64]>) {
    let n = x.len();
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[o] += g;
        for (d, xi) in dw[o * n..(o + 1) * n].iter_mut().zip(x) {
            *d += g * xi;
        }
    }
    if let Some(dx) = dx {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (d, wi) in dx.iter_mut().zip(&w[o * n..(o + 1) * n]) {
                *d += g * wi;
            }
        }
    }
}

struct ConvShape {
    iw: usize,
    ic: usize,
    oh: usize,
    ow: usize,
    spec: ConvSpec,
}

/// Valid convolution with ReLU; all tensors height x width x channel.
fn conv_relu(input: &[f64], s: &ConvShape, w: &[f64], b: &[f64]) -> Vec<f64> {
    let (k, oc) = (s.spec.kernel, s.spec.filters);
    let mut out = vec![0.0; s.oh * s.ow * oc];
    for r in 0..s.oh {
        for c in 0..s.ow {
            let base = (r * s.ow + c) * oc;
            for o in 0..oc {
                let mut acc = b[o];
                for kr in 0..k {
                    let irow = r * s.spec.stride + kr;
                    let icol = c * s.spec.stride;
                    let x = &input[(irow * s.iw + icol) * s.ic..(irow * s.iw + icol + k) * s.ic];
                    let wrow = &w[((o * k + kr) * k) * s.ic..((o * k + kr) * k + k) * s.ic];
                    acc += x.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                }
                out[base + o] = acc.max(0.0);
            }
        }
    }
    out
}

/// `dout` is the gradient w.r.t. the pre-activation output.
fn conv_backward(
    input: &[f64],
    s: &ConvShape,
    w: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let (k, oc) = (s.spec.kernel, s.spec.filters);
    for r in 0..s.oh {
        for c in 0..s.ow {
            let base = (r * s.ow + c) * oc;
            for o in 0..oc {
                let g = dout[base + o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                for kr in 0..k {
                    let irow = r * s.spec.stride + kr;
                    let icol = c * s.spec.stride;
                    let xr = (irow * s.iw + icol) * s.ic..(irow * s.iw + icol + k) * s.ic;
                    let wr = ((o * k + kr) * k) * s.ic..((o * k + kr) * k + k) * s.ic;
                    for (d, x) in dw[wr.clone()].iter_mut().zip(&input[xr.clone()]) {
                        *d += g * x;
                    }
                    if let Some(din) = din.as_deref_mut() {
                        for (d, wv) in din[xr].iter_mut().zip(&w[wr]) {
                            *d += g * wv;
                        }
                    }
                }
            }
        }
    }
}

struct FrameCache {
    pixels: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

struct StepCache {
    frame: usize,
    fc: Vec<f64>,
    /// Activated gates i, f, g, o.
    gates: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    pc_hidden: Vec<f64>,
}

/// Forward pass over a rollout that keeps every intermediate needed for backpropagation.
pub struct Trace<'p> {
    params: &'p Parameters,
    geo: Geometry,
    mask: HeadMask,
    frames: Vec<Option<FrameCache>>,
    steps: Vec<StepCache>,
    outputs: Vec<ForwardOutput>,
    state: RecurrentState,
    history: Vec<Observation>,
}

impl<'p> Trace<'p> {
    pub fn new(params: &'p Parameters, state: &RecurrentState, mask: HeadMask) -> Result<Trace<'p>, NetError> {
        let config = &params.config;
        let geo = config.geometry()?;
        if state.hidden.len() != config.recurrent || state.cell.len() != config.recurrent {
            return Err(NetError::Shape {
                layer: "recurrent state",
                expected: config.recurrent.to_string(),
                found: state.hidden.len().to_string(),
            });
        }
        // The reward-prediction window is padded with blank frames at episode start.
        let mut history: Vec<Observation> = state.recent_frames.iter().rev().take(RP_FRAMES - 1).cloned().collect();
        history.reverse();
        while history.len() < RP_FRAMES - 1 {
            history.insert(0, Observation::zeros(config.input_height, config.input_width));
        }
        let mut trace = Trace {
            params,
            geo,
            mask,
            frames: Vec::new(),
            steps: Vec::new(),
            outputs: Vec::new(),
            state: RecurrentState { hidden: state.hidden.clone(), cell: state.cell.clone(), recent_frames: Vec::new() },
            history: history.clone(),
        };
        for f in &history {
            let cache = if mask.reward_prediction { Some(trace.encode(f)?) } else { None };
            trace.frames.push(cache);
        }
        Ok(trace)
    }

    fn check_frame(&self, frame: &Observation) -> Result<(), NetError> {
        let c = &self.params.config;
        if frame.height != c.input_height || frame.width != c.input_width {
            return Err(NetError::Shape {
                layer: "input",
                expected: format!("{}x{}x3", c.input_height, c.input_width),
                found: format!("{}x{}x3", frame.height, frame.width),
            });
        }
        Ok(())
    }

    fn conv_shapes(&self) -> (ConvShape, ConvShape) {
        let c = &self.params.config;
        let g = &self.geo;
        (
            ConvShape { iw: c.input_width, ic: 3, oh: g.c1_h, ow: g.c1_w, spec: c.conv1 },
            ConvShape { iw: g.c1_w, ic: c.conv1.filters, oh: g.c2_h, ow: g.c2_w, spec: c.conv2 },
        )
    }

    fn encode(&self, frame: &Observation) -> Result<FrameCache, NetError> {
        self.check_frame(frame)?;
        let p = self.params;
        let (s1, s2) = self.conv_shapes();
        let pixels: Vec<f64> = frame.data().iter().map(|&v| v as f64).collect();
        let c1 = conv_relu(&pixels, &s1, p.get(ParamId::Conv1W), p.get(ParamId::Conv1B));
        let c2 = conv_relu(&c1, &s2, p.get(ParamId::Conv2W), p.get(ParamId::Conv2B));
        Ok(FrameCache { pixels, c1, c2 })
    }

    /// Evaluates one more timestep, threading the recurrent state.
    pub fn push(&mut self, frame: &Observation) -> Result<&ForwardOutput, NetError> {
        let config = self.params.config;
        if self.steps.len() >= config.unroll {
            return Err(NetError::SequenceTooLong { len: self.steps.len() + 1, unroll: config.unroll });
        }
        let p = self.params;
        let r = config.recurrent;
        let cache = self.encode(frame)?;

        let fc: Vec<f64> = affine(p.get(ParamId::FcW), p.get(ParamId::FcB), &cache.c2)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();

        let mut pre = affine(p.get(ParamId::LstmWx), p.get(ParamId::LstmB), &fc);
        let wh = p.get(ParamId::LstmWh);
        for (j, v) in pre.iter_mut().enumerate() {
            *v += wh[j * r..(j + 1) * r].iter().zip(&self.state.hidden).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut gates = vec![0.0; 4 * r];
        for j in 0..r {
            gates[j] = sigmoid(pre[j]);
            gates[r + j] = sigmoid(pre[r + j]);
            gates[2 * r + j] = pre[2 * r + j].tanh();
            gates[3 * r + j] = sigmoid(pre[3 * r + j]);
        }
        let c_prev = std::mem::take(&mut self.state.cell);
        let h_prev = std::mem::take(&mut self.state.hidden);
        let c: Vec<f64> = (0..r).map(|j| gates[r + j] * c_prev[j] + gates[j] * gates[2 * r + j]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..r).map(|j| gates[3 * r + j] * tanh_c[j]).collect();

        let policy_logits = affine(p.get(ParamId::PolicyW), p.get(ParamId::PolicyB), &h);
        let policy = softmax(&policy_logits);
        let value = affine(p.get(ParamId::ValueW), p.get(ParamId::ValueB), &h)[0];

        let frame_idx = self.frames.len();
        self.frames.push(Some(cache));

        let mut rp_logits = [0.0; 3];
        if self.mask.reward_prediction {
            let window = self.rp_window(frame_idx);
            let out = affine(p.get(ParamId::RpW), p.get(ParamId::RpB), &window);
            rp_logits.copy_from_slice(&out);
        }

        let (pc_hidden, pc_q) = if self.mask.pixel_control {
            let hid: Vec<f64> = affine(p.get(ParamId::PcFcW), p.get(ParamId::PcFcB), &h)
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            let q = self.deconv(&hid);
            (hid, q)
        } else {
            (Vec::new(), vec![0.0; self.geo.pc_h * self.geo.pc_w * config.actions])
        };

        self.history.push(frame.clone());
        if self.history.len() > RP_FRAMES - 1 {
            self.history.remove(0);
        }
        self.state.hidden = h.clone();
        self.state.cell = c;
        self.state.recent_frames = self.history.clone();

        self.steps.push(StepCache {
            frame: frame_idx,
            fc,
            gates,
            h_prev,
            c_prev,
            tanh_c,
            h,
            pc_hidden,
        });
        self.outputs.push(ForwardOutput {
            policy,
            policy_logits,
            value,
            rp_logits,
            pc_q,
            next_state: self.state.clone(),
        });
        Ok(self.outputs.last().expect("just pushed"))
    }

    fn rp_window(&self, frame_idx: usize) -> Vec<f64> {
        let mut window = Vec::with_capacity(RP_FRAMES * self.geo.features);
        for idx in frame_idx + 1 - RP_FRAMES..=frame_idx {
            window.extend_from_slice(&self.frames[idx].as_ref().expect("rp frames encoded").c2);
        }
        window
    }

    fn deconv(&self, hidden: &[f64]) -> Vec<f64> {
        let c = &self.params.config;
        let (a, pc) = (c.actions, c.pc);
        let (k, ch) = (pc.kernel, pc.channels);
        let w = self.params.get(ParamId::PcDeconvW);
        let b = self.params.get(ParamId::PcDeconvB);
        let pw = self.geo.pc_w;
        let mut out: Vec<f64> = (0..self.geo.pc_h * pw).flat_map(|_| b.iter().copied()).collect();
        for r in 0..pc.grid_h {
            for col in 0..pc.grid_w {
                let x = &hidden[(r * pc.grid_w + col) * ch..(r * pc.grid_w + col + 1) * ch];
                for kr in 0..k {
                    for kc in 0..k {
                        let o = ((r * pc.stride + kr) * pw + col * pc.stride + kc) * a;
                        for ai in 0..a {
                            let wr = &w[((ai * k + kr) * k + kc) * ch..((ai * k + kr) * k + kc + 1) * ch];
                            out[o + ai] += wr.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
                        }
                    }
                }
            }
        }
        out
    }

    fn deconv_backward(&self, hidden: &[f64], dout: &[f64], dw: &mut [f64], db: &mut [f64], dhid: &mut [f64]) {
        let c = &self.params.config;
        let (a, pc) = (c.actions, c.pc);
        let (k, ch) = (pc.kernel, pc.channels);
        let w = self.params.get(ParamId::PcDeconvW);
        let pw = self.geo.pc_w;
        for cell in dout.chunks_exact(a) {
            for (d, g) in db.iter_mut().zip(cell) {
                *d += g;
            }
        }
        for r in 0..pc.grid_h {
            for col in 0..pc.grid_w {
                let hr = (r * pc.grid_w + col) * ch..(r * pc.grid_w + col + 1) * ch;
                for kr in 0..k {
                    for kc in 0..k {
                        let o = ((r * pc.stride + kr) * pw + col * pc.stride + kc) * a;
                        for ai in 0..a {
                            let g = dout[o + ai];
                            if g == 0.0 {
                                continue;
                            }
                            let wr = ((ai * k + kr) * k + kc) * ch..((ai * k + kr) * k + kc + 1) * ch;
                            for (d, x) in dw[wr.clone()].iter_mut().zip(&hidden[hr.clone()]) {
                                *d += g * x;
                            }
                            for (d, wv) in dhid[hr.clone()].iter_mut().zip(&w[wr]) {
                                *d += g * wv;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn outputs(&self) -> &[ForwardOutput] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State after the last pushed frame.
    pub fn state(&self) -> &RecurrentState {
        &self.state
    }

    /// Backpropagates per-step output gradients, accumulating `scale * dL/dparams` into `out`.
    pub fn backward(&self, grads: &[OutputGrad], scale: f64, out: &mut Parameters) {
        assert_eq!(grads.len(), self.steps.len(), "one output gradient per step");
        let p = self.params;
        let config = &p.config;
        let r = config.recurrent;
        let features = self.geo.features;

        let mut dfeat: Vec<Option<Vec<f64>>> = (0..self.frames.len()).map(|_| None).collect();
        let mut dh_next = vec![0.0; r];
        let mut dc_next = vec![0.0; r];

        for t in (0..self.steps.len()).rev() {
            let s = &self.steps[t];
            let g = &grads[t];
            let mut dh = std::mem::take(&mut dh_next);

            let dlogits: Vec<f64> = g.policy_logits.iter().map(|v| v * scale).collect();
            {
                let (pw, pb) = two_mut(out, ParamId::PolicyW, ParamId::PolicyB);
                affine_backward(p.get(ParamId::PolicyW), &s.h, &dlogits, pw, pb, Some(&mut dh));
            }
            let dv = [g.value * scale];
            {
                let (vw, vb) = two_mut(out, ParamId::ValueW, ParamId::ValueB);
                affine_backward(p.get(ParamId::ValueW), &s.h, &dv, vw, vb, Some(&mut dh));
            }

            if self.mask.pixel_control && g.pc_q.iter().any(|&v| v != 0.0) {
                let dq: Vec<f64> = g.pc_q.iter().map(|v| v * scale).collect();
                let mut dhid = vec![0.0; s.pc_hidden.len()];
                {
                    let (dw, db) = two_mut(out, ParamId::PcDeconvW, ParamId::PcDeconvB);
                    self.deconv_backward(&s.pc_hidden, &dq, dw, db, &mut dhid);
                }
                for (d, hv) in dhid.iter_mut().zip(&s.pc_hidden) {
                    if *hv <= 0.0 {
                        *d = 0.0;
                    }
                }
                let (fw, fb) = two_mut(out, ParamId::PcFcW, ParamId::PcFcB);
                affine_backward(p.get(ParamId::PcFcW), &s.h, &dhid, fw, fb, Some(&mut dh));
            }

            if self.mask.reward_prediction && g.rp_logits.iter().any(|&v| v != 0.0) {
                let drp: Vec<f64> = g.rp_logits.iter().map(|v| v * scale).collect();
                let window = self.rp_window(s.frame);
                let mut dwin = vec![0.0; window.len()];
                {
                    let (rw, rb) = two_mut(out, ParamId::RpW, ParamId::RpB);
                    affine_backward(p.get(ParamId::RpW), &window, &drp, rw, rb, Some(&mut dwin));
                }
                for (i, chunk) in dwin.chunks_exact(features).enumerate() {
                    let idx = s.frame + 1 + i - RP_FRAMES;
                    add_into(&mut dfeat[idx], chunk);
                }
            }

            // LSTM cell.
            let (ig, fg, gg, og) = (&s.gates[..r], &s.gates[r..2 * r], &s.gates[2 * r..3 * r], &s.gates[3 * r..]);
            let mut dgates = vec![0.0; 4 * r];
            for j in 0..r {
                let dc = dc_next[j] + dh[j] * og[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                let d_o = dh[j] * s.tanh_c[j];
                dgates[j] = dc * gg[j] * ig[j] * (1.0 - ig[j]);
                dgates[r + j] = dc * s.c_prev[j] * fg[j] * (1.0 - fg[j]);
                dgates[2 * r + j] = dc * ig[j] * (1.0 - gg[j] * gg[j]);
                dgates[3 * r + j] = d_o * og[j] * (1.0 - og[j]);
                dc_next[j] = dc * fg[j];
            }
            let mut dfc = vec![0.0; s.fc.len()];
            {
                let (wx, lb) = two_mut(out, ParamId::LstmWx, ParamId::LstmB);
                affine_backward(p.get(ParamId::LstmWx), &s.fc, &dgates, wx, lb, Some(&mut dfc));
            }
            let mut dh_prev = vec![0.0; r];
            {
                let wh_grad = out.get_mut(ParamId::LstmWh);
                let wh = p.get(ParamId::LstmWh);
                for (jj, &gv) in dgates.iter().enumerate() {
                    if gv == 0.0 {
                        continue;
                    }
                    for k in 0..r {
                        wh_grad[jj * r + k] += gv * s.h_prev[k];
                        dh_prev[k] += gv * wh[jj * r + k];
                    }
                }
            }
            dh_next = dh_prev;

            for (d, v) in dfc.iter_mut().zip(&s.fc) {
                if *v <= 0.0 {
                    *d = 0.0;
                }
            }
            let frame = self.frames[s.frame].as_ref().expect("step frames encoded");
            let mut dx = vec![0.0; features];
            {
                let (fw, fb) = two_mut(out, ParamId::FcW, ParamId::FcB);
                affine_backward(p.get(ParamId::FcW), &frame.c2, &dfc, fw, fb, Some(&mut dx));
            }
            add_into(&mut dfeat[s.frame], &dx);
        }

        let (s1, s2) = self.conv_shapes();
        for (idx, d) in dfeat.into_iter().enumerate() {
            let Some(mut d2) = d else { continue };
            let frame = self.frames[idx].as_ref().expect("encoded");
            for (g, v) in d2.iter_mut().zip(&frame.c2) {
                if *v <= 0.0 {
                    *g = 0.0;
                }
            }
            let mut d1 = vec![0.0; frame.c1.len()];
            {
                let (w, b) = two_mut(out, ParamId::Conv2W, ParamId::Conv2B);
                conv_backward(&frame.c1, &s2, p.get(ParamId::Conv2W), &d2, w, b, Some(&mut d1));
            }
            for (g, v) in d1.iter_mut().zip(&frame.c1) {
                if *v <= 0.0 {
                    *g = 0.0;
                }
            }
            let (w, b) = two_mut(out, ParamId::Conv1W, ParamId::Conv1B);
            conv_backward(&frame.pixels, &s1, p.get(ParamId::Conv1W), &d1, w, b, None);
        }
    }
}

fn add_into(slot: &mut Option<Vec<f64>>, v: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
        None => *slot = Some(v.to_vec()),
    }
}

fn two_mut(p: &mut Parameters, a: ParamId, b: ParamId) -> (&mut [f64], &mut [f64]) {
    let (ia, ib) = (a.index(), b.index());
    assert!(ia < ib);
    let (lo, hi) = p.tensors_mut().split_at_mut(ib);
    (&mut lo[ia].data, &mut hi[0].data)
}

/// Runs every head over `frames`, starting from `state`.
pub fn forward(
    params: &Parameters,
    frames: &[Observation],
    state: &RecurrentState,
) -> Result<Vec<ForwardOutput>, NetError> {
    let unroll = params.config.unroll;
    if frames.len() > unroll {
        return Err(NetError::SequenceTooLong { len: frames.len(), unroll });
    }
    let mut trace = Trace::new(params, state, HeadMask::ALL)?;
    for f in frames {
        trace.push(f)?;
    }
    Ok(trace.outputs)
}

/// Loss value and its exact gradient with respect to every parameter.
pub fn gradients<L: RolloutLoss + ?Sized>(
    params: &Parameters,
    frames: &[Observation],
    state: &RecurrentState,
    loss: &L,
) -> Result<(f64, Parameters), NetError> {
    let mut trace = Trace::new(params, state, HeadMask::ALL)?;
    for f in frames {
        trace.push(f)?;
    }
    let eval = loss.evaluate(trace.outputs());
    for &(head, v) in &eval.terms {
        if !v.is_finite() {
            return Err(NetError::NonFinite(head));
        }
    }
    let mut grad = params.zeros_like();
    trace.backward(&eval.grads, 1.0, &mut grad);
    Ok((eval.total(), grad))
}
