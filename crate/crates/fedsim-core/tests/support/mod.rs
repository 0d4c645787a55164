//! Test-only oracles, written independently of the library's code paths.
#![allow(dead_code)]

use fedsim_core::ann::WEIGHT_COUNT;
use fedsim_core::{ModelWeights, Sample};

/// SplitMix64, used only to draw random test cases.
pub struct CaseRng(u64);

impl CaseRng {
    pub fn new(seed: u64) -> Self {
        CaseRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn weights(&mut self, lo: f64, hi: f64) -> ModelWeights {
        let flat: [f64; WEIGHT_COUNT] = std::array::from_fn(|_| self.uniform(lo, hi));
        ModelWeights::from_flat(&flat)
    }

    pub fn sample(&mut self) -> Sample {
        Sample::new(
            [self.uniform(0.0, 1.0), self.uniform(0.0, 1.0)],
            [self.uniform(0.0, 1.0), self.uniform(0.0, 1.0)],
        )
    }
}

/// Line-by-line transliteration of the reference `ann/3` routine and its helpers, on
/// plain lists, with a constant `1.0` appended to each layer's inputs so the
/// last weight of every row acts as the bias.
pub mod reference {
    pub type List = Vec<f64>;

    fn activation_fun(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn lists_sum(l: &[f64]) -> f64 {
        // lists:sum/1 folds from the left starting at 0
        l.iter().fold(0.0, |sum, h| sum + h)
    }

    fn zipwith(f: impl Fn(f64, f64) -> f64, a: &[f64], b: &[f64]) -> List {
        assert_eq!(a.len(), b.len(), "lists:zipwith/3 needs equal lengths");
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    }

    fn with_bias(l: &[f64]) -> List {
        let mut v = l.to_vec();
        v.push(1.0);
        v
    }

    // forward(_, [], Acc) -> lists:reverse(Acc);
    // forward(Input, [W|Ws], Acc) -> Val = lists:sum(zipwith(X*Y, Input, W)), forward(Input, Ws, [Val|Acc]).
    fn forward(input: &[f64], ws: &[List], mut acc: List) -> List {
        match ws.split_first() {
            None => {
                acc.reverse();
                acc
            }
            Some((w, rest)) => {
                let val = lists_sum(&zipwith(|x, y| x * y, input, w));
                acc.insert(0, val);
                forward(input, rest, acc)
            }
        }
    }

    fn output_error(vals: &[f64], target: &[f64]) -> List {
        zipwith(|x, y| x * (1.0 - x) * (x - y), vals, target)
    }

    fn backpropagate(input: &[f64], es: &[f64], wss: &[List], mut acc: Vec<List>) -> Vec<List> {
        match (es.split_first(), wss.split_first()) {
            (None, None) => {
                acc.reverse();
                acc
            }
            (Some((&e, es)), Some((ws, wss))) => {
                let a = zipwith(|w, i| w - (e * i), ws, input);
                acc.insert(0, a);
                backpropagate(input, es, wss, acc)
            }
            _ => panic!("no matching clause"),
        }
    }

    fn errors_hidden(hs: &[f64], output_err: &[f64], weights: &[List], mut acc: List) -> List {
        match hs.split_first() {
            None => {
                acc.reverse();
                acc
            }
            Some((&h, hs)) => {
                let outgoing: List = weights.iter().map(|x| x[0]).collect();
                let rest: Vec<List> = weights.iter().map(|x| x[1..].to_vec()).collect();
                let tmp = zipwith(|x, e| e * x, &outgoing, output_err);
                let a = lists_sum(&tmp) * h * (1.0 - h);
                acc.insert(0, a);
                errors_hidden(hs, output_err, &rest, acc)
            }
        }
    }

    /// Returns `(Output_Errors, {W_Input_, W_Hidden_})`.
    pub fn ann(
        input: &[f64],
        weights: (&[List], &[List]),
        targets: &[f64],
    ) -> (List, (Vec<List>, Vec<List>)) {
        let (w_input, w_hidden) = weights;

        let hidden_in = forward(&with_bias(input), w_input, Vec::new());
        let hidden_out: List = hidden_in.iter().map(|&x| activation_fun(x)).collect();
        let output_in = forward(&with_bias(&hidden_out), w_hidden, Vec::new());
        let output_out: List = output_in.iter().map(|&x| activation_fun(x)).collect();

        let _delta = zipwith(|x, y| x - y, targets, &output_out);

        let output_errors = output_error(&output_out, targets);

        let w_hidden_ = backpropagate(
            &with_bias(&hidden_out),
            &output_errors,
            w_hidden,
            Vec::new(),
        );
        let hidden_err = errors_hidden(&hidden_out, &output_errors, &w_hidden_, Vec::new());
        let w_input_ = backpropagate(&with_bias(input), &hidden_err, w_input, Vec::new());
        (output_errors, (w_input_, w_hidden_))
    }
}

/// Training loss `½ Σ (o − t)²` evaluated with straightforward loops over
/// the canonical flat weight vector.
pub fn loss_from_flat(w: &[f64; WEIGHT_COUNT], s: &Sample) -> f64 {
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut hidden = [0.0; 3];
    for (j, h) in hidden.iter_mut().enumerate() {
        let row = &w[3 * j..3 * j + 3];
        *h = sig(row[0] * s.input[0] + row[1] * s.input[1] + row[2]);
    }
    let mut loss = 0.0;
    for k in 0..2 {
        let row = &w[9 + 4 * k..9 + 4 * k + 4];
        let o = sig(row[0] * hidden[0] + row[1] * hidden[1] + row[2] * hidden[2] + row[3]);
        loss += 0.5 * (o - s.target[k]) * (o - s.target[k]);
    }
    loss
}

/// Central finite differences of [`loss_from_flat`], divided by the step
/// actually taken after rounding.
pub fn finite_difference_gradient(w: &ModelWeights, s: &Sample, h: f64) -> [f64; WEIGHT_COUNT] {
    let flat = w.to_flat();
    std::array::from_fn(|i| {
        let mut plus = flat;
        let mut minus = flat;
        plus[i] += h;
        minus[i] -= h;
        (loss_from_flat(&plus, s) - loss_from_flat(&minus, s)) / (plus[i] - minus[i])
    })
}

/// `|a − b| ≤ max(rel · |b|, abs_floor)`.
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= (rel * b.abs()).max(abs_floor)
}

pub fn to_lists(w: &ModelWeights) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        w.w_input.iter().map(|r| r.to_vec()).collect(),
        w.w_hidden.iter().map(|r| r.to_vec()).collect(),
    )
}

pub fn from_lists(w_input: &[Vec<f64>], w_hidden: &[Vec<f64>]) -> ModelWeights {
    let mut w = ModelWeights::zeros();
    for (dst, src) in w.w_input.iter_mut().zip(w_input) {
        dst.copy_from_slice(src);
    }
    for (dst, src) in w.w_hidden.iter_mut().zip(w_hidden) {
        dst.copy_from_slice(src);
    }
    w
}

pub fn read_hex_fixture(path: &str) -> Vec<u8> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let text = text.trim();
    (0..text.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&text[i..i + 2], 16).expect("hex fixture"))
        .collect()
}
