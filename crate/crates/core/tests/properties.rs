mod common;

use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::sample::SizeRange;

use embednn::codegen::{max_params, plan, Gamma};
use embednn::fixtures::{chain, random_inputs, Fixture};
use embednn::interpreter::forward_traced;
use embednn::model_ir::{execution_order, Activation, LayerKind, LayerSpec, NetworkGraph, Padding, INPUT_ID};
use embednn::parser::{parse_model, serialize_model, serialize_with_sidecar};
use embednn::quantizer::{fidelity_report, quantize, quantize_value, QFormat};

fn activation() -> impl Strategy<Value = Activation> {
    prop::sample::select(Activation::ALL.to_vec())
}

fn padding() -> impl Strategy<Value = Padding> {
    prop_oneof![Just(Padding::Valid), Just(Padding::Same)]
}

/// One step of a 1-D feature extractor; invalid steps are dropped when the chain is built.
fn step_1d() -> impl Strategy<Value = LayerKind> {
    prop_oneof![
        (1..4usize, 1..6usize, 1..3usize, padding(), activation()).prop_map(
            |(filters, kernel_size, stride, padding, activation)| {
                LayerKind::Conv1D {
                    filters,
                    kernel_size,
                    stride,
                    padding,
                    activation: if activation == Activation::Softmax {
                        Activation::Relu
                    } else {
                        activation
                    },
                }
            }
        ),
        (1..4usize, 1..4usize).prop_map(|(pool_size, stride)| LayerKind::MaxPool1D { pool_size, stride }),
    ]
}

fn step_2d() -> impl Strategy<Value = LayerKind> {
    prop_oneof![
        (1..3usize, 1..4usize, 1..4usize, 1..3usize, 1..3usize, padding()).prop_map(
            |(filters, kernel_h, kernel_w, stride_h, stride_w, padding)| {
                LayerKind::Conv2D {
                    filters,
                    kernel_h,
                    kernel_w,
                    stride_h,
                    stride_w,
                    padding,
                    activation: Activation::Tanh,
                }
            }
        ),
        (1..3usize, 1..3usize).prop_map(|(pool_h, pool_w)| LayerKind::MaxPool2D {
            pool_h,
            pool_w,
            stride_h: pool_h,
            stride_w: pool_w,
        }),
    ]
}

/// Random valid chain: optional conv/pool prefix, flatten, then dense layers.
fn graph() -> impl Strategy<Value = NetworkGraph> {
    let one_d =
        (1..24usize, 1..4usize, prop::collection::vec(step_1d(), 0..4)).prop_map(|(l, c, steps)| (vec![l, c], steps));
    let two_d = (
        1..10usize,
        1..10usize,
        1..3usize,
        prop::collection::vec(step_2d(), 0..3),
    )
        .prop_map(|(h, w, c, steps)| (vec![h, w, c], steps));
    let dense = prop::collection::vec((1..8usize, activation()), 1..4);
    (prop_oneof![one_d, two_d], dense, any::<u64>()).prop_filter_map(
        "no valid chain",
        |((shape, steps), dense, seed)| {
            let mut current = shape.clone();
            let mut kinds = Vec::new();
            for kind in steps {
                if let Ok(next) = embednn::model_ir::output_shape("probe", &kind, &current) {
                    current = next;
                    kinds.push(kind);
                }
            }
            kinds.push(LayerKind::Flatten);
            kinds.extend(
                dense
                    .into_iter()
                    .map(|(units, activation)| LayerKind::Dense { units, activation }),
            );
            let mut prev = INPUT_ID.to_string();
            let specs = kinds
                .into_iter()
                .enumerate()
                .map(|(i, kind)| {
                    let id = format!("layer{i}");
                    let spec = LayerSpec::new(id.clone(), kind, prev.clone());
                    prev = id;
                    spec
                })
                .collect();
            chain("random", &shape, specs, seed).ok()
        },
    )
}

/// A forest over `n` nodes with scrambled ids; each node reads the input or an earlier node.
fn forest(size: impl Into<SizeRange>) -> impl Strategy<Value = Vec<LayerSpec>> {
    prop::collection::vec((any::<prop::sample::Index>(), any::<u32>()), size).prop_map(|picks| {
        let ids: Vec<String> = picks
            .iter()
            .enumerate()
            .map(|(i, (_, salt))| format!("n{salt:08x}_{i}"))
            .collect();
        let mut specs: Vec<LayerSpec> = picks
            .iter()
            .enumerate()
            .map(|(i, (pick, _))| {
                let input = match pick.index(i + 1) {
                    0 => INPUT_ID.to_string(),
                    j => ids[j - 1].clone(),
                };
                LayerSpec::new(ids[i].clone(), LayerKind::Flatten, input)
            })
            .collect();
        specs.reverse();
        specs
    })
}

fn scalar_count(text: &str) -> usize {
    let doc: serde_json::Value = serde_json::from_str(text).unwrap();
    doc["weights"]
        .as_object()
        .map(|w| {
            w.values()
                .flat_map(|t| [&t["kernel"]["data"], &t["bias"]["data"]])
                .map(|d| d.as_array().unwrap().len())
                .sum()
        })
        .unwrap_or(0)
}

fn weight_bits(g: &NetworkGraph) -> Vec<u32> {
    g.layers()
        .filter_map(|n| n.weights.as_ref())
        .flat_map(|w| {
            w.kernel
                .data()
                .iter()
                .chain(w.bias.data())
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn traced_shapes_match_inference(g in graph()) {
        let x = random_inputs(&g, 1, 3).remove(0);
        let trace = forward_traced(&g, &x).unwrap();
        prop_assert_eq!(trace.len(), g.len());
        for (id, t) in trace.iter() {
            prop_assert_eq!(t.shape(), g.shapes().get(id).unwrap());
        }
    }

    #[test]
    fn execution_order_is_topological(specs in forest(1..40)) {
        let order = execution_order(&specs).unwrap();
        prop_assert_eq!(order.len(), specs.len());
        let pos = |id: &str| order.iter().position(|o| o == id);
        for s in &specs {
            if s.inputs[0] != INPUT_ID {
                prop_assert!(pos(&s.inputs[0]).unwrap() < pos(&s.id).unwrap());
            }
        }
        let mut rotated = specs.clone();
        rotated.rotate_left(specs.len() / 2);
        prop_assert_eq!(execution_order(&rotated).unwrap(), order);
    }

    #[test]
    fn param_count_equals_serialized_scalars(g in graph()) {
        let text = serialize_model(&g).unwrap();
        prop_assert_eq!(scalar_count(&text), g.param_count());
    }

    #[test]
    fn round_trip_is_bit_identical(g in graph(), bits in prop::collection::vec(any::<u32>(), 64)) {
        // Overwrite weights with arbitrary finite bit patterns, subnormals included.
        let mut k = 0usize;
        let mut layers = g.clone().into_layers();
        for node in layers.iter_mut() {
            if let Some(w) = node.weights.as_mut() {
                for t in [&mut w.kernel, &mut w.bias] {
                    let (shape, mut data) = t.clone().into_parts();
                    for v in data.iter_mut() {
                        let candidate = f32::from_bits(bits[k % bits.len()]);
                        k += 1;
                        if candidate.is_finite() {
                            *v = candidate;
                        }
                    }
                    *t = embednn::tensor::TensorData::new(shape, data).unwrap();
                }
            }
        }
        let g = NetworkGraph::new(g.name(), g.input_shape().to_vec(), layers, g.output_id()).unwrap();
        let text = serialize_model(&g).unwrap();
        let back = parse_model(text.as_bytes(), None).unwrap();
        prop_assert_eq!(back.execution_order(), g.execution_order());
        prop_assert_eq!(back.shapes(), g.shapes());
        prop_assert_eq!(weight_bits(&back), weight_bits(&g));
        let (doc, side) = serialize_with_sidecar(&g, "w.nnwb").unwrap();
        let back = parse_model(doc.as_bytes(), Some(&side)).unwrap();
        prop_assert_eq!(weight_bits(&back), weight_bits(&g));
    }

    #[test]
    fn quantization_error_is_half_an_ulp(x in -1.0e4f64..1.0e4, total in prop::sample::select(vec![8u32, 16, 32]), frac in 0u32..31) {
        prop_assume!(frac < total);
        let q = QFormat::new(total, frac).unwrap();
        let (v, saturated) = quantize(x, q);
        if !saturated {
            prop_assert!((v - x).abs() <= 2f64.powi(-(frac as i32) - 1));
        } else {
            prop_assert!(v == q.max_value() || v == q.min_value());
        }
        prop_assert_eq!(quantize_value(v, q), v);
    }

    #[test]
    fn footprint_matches_bignum_oracle(
        flash in 1u64..u64::MAX,
        num in 1u64..1_000_000,
        extra in 0u64..1_000_000,
        bits in prop::sample::select(vec![8u32, 16, 32]),
    ) {
        let gamma = Gamma::new(num, num + extra).unwrap();
        let want = BigUint::from(gamma.numerator()) * BigUint::from(flash)
            / (BigUint::from(gamma.denominator()) * BigUint::from(bits));
        prop_assert_eq!(BigUint::from(max_params(flash, gamma, bits)), want);
    }

    #[test]
    fn fits_is_monotone(p in 0u64..100_000, s in 1u64..10_000_000, ds in 0u64..1_000_000, dp in 0u64..1000) {
        let fits = |p, s| plan(p, 0, s, Gamma::ONE, 32).unwrap().fits;
        if fits(p, s) {
            prop_assert!(fits(p, s + ds));
        }
        if fits(p + dp, s) {
            prop_assert!(fits(p, s));
        }
    }
}

#[test]
fn epsilon_is_monotone_on_every_fixture() {
    for f in Fixture::ALL {
        let draws = if f == Fixture::Terrain { 5 } else { 50 };
        for seed in 0..draws {
            let g = f.build(seed);
            let inputs = random_inputs(&g, 4, 100 + seed);
            let r = fidelity_report(&g, &inputs, &[2, 8, 16, 32]).unwrap();
            let e = |k| r.epsilon(k).unwrap();
            assert!(
                e(2) >= e(8) && e(8) >= e(16) && e(16) >= e(32),
                "{} seed {seed}: {r:?}",
                f.name()
            );
            assert_eq!(e(32), 0.0);
        }
    }
}

/// The 1e-6 bound holds while weights and activations stay within [-8, 8];
/// wider ranges leave fewer fraction bits and float32 rounding dominates.
#[test]
fn thirty_two_bit_fixed_point_tracks_float() {
    let mut checked = 0;
    for f in Fixture::ALL {
        let g = f.build(3);
        let inputs = random_inputs(&g, 10, 4);
        let in_range = inputs
            .iter()
            .all(|x| forward_traced(&g, x).unwrap().iter().all(|(_, t)| t.max_abs() <= 8.0));
        if !in_range {
            continue;
        }
        checked += 1;
        for x in &inputs {
            let want = embednn::interpreter::forward(&g, x).unwrap();
            let got = embednn::quantizer::forward_fixed(&g, x, 32).unwrap();
            assert!(common::max_abs_diff(want.data(), got.data()) <= 1e-6, "{}", f.name());
        }
    }
    assert!(checked >= 5, "only {checked} fixtures stay within [-8, 8]");
}
