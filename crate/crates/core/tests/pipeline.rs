use est_core::convert::{calibrate_thresholds, convert};
use est_core::metrics::{agreement, metrics_rows, synops, write_metrics_csv};
use est_core::snn::{run_batch, GainMode, Mode, PsaSchedule};
use est_core::{ann_forward, gen_synthetic, io, train_sgd, AnnDims, AnnParams, SgdConfig};

fn trained() -> (AnnParams, est_core::Dataset, est_core::Dataset) {
    let dims = AnnDims {
        n_tokens: 4,
        d_model: 6,
        d_head: 4,
        d_hidden: 8,
        n_classes: 3,
        blocks: 1,
    };
    let train = gen_synthetic(30, 3, 4, 6, 1).unwrap();
    let test = gen_synthetic(20, 3, 4, 6, 2).unwrap();
    let init = AnnParams::init(dims, 5).unwrap();
    let (ann, _) = train_sgd(&init, &train, &SgdConfig::new(60, 0.05, 3)).unwrap();
    (ann, train, test)
}

#[test]
fn converted_model_tracks_ann_and_survives_json() {
    let (ann, train, test) = trained();
    let (th, _) = calibrate_thresholds(&ann, &train, 99.9).unwrap();
    let m = convert(&ann, &th, PsaSchedule::full(128).unwrap(), Mode::Sa).unwrap();
    let reloaded = io::snn_from_json(&io::snn_to_json(&m).unwrap()).unwrap();
    assert_eq!(reloaded, m);

    let ann_logits: Vec<_> = test
        .inputs
        .iter()
        .map(|x| ann_forward(&ann, x).unwrap().0)
        .collect();
    let out = run_batch(&reloaded, &test.inputs, 2).unwrap();
    assert!(agreement(&out.logits, &ann_logits).unwrap() >= 0.95);
}

#[test]
fn psa_cuts_attention_work_and_rows_are_worker_independent() {
    let (ann, train, test) = trained();
    let (th, _) = calibrate_thresholds(&ann, &train, 99.9).unwrap();
    let sa = convert(&ann, &th, PsaSchedule::full(32).unwrap(), Mode::Sa).unwrap();
    let psa = convert(
        &ann,
        &th,
        PsaSchedule::new(32, 0.5, GainMode::Unity).unwrap(),
        Mode::Psa,
    )
    .unwrap();
    let names = ["q", "k", "score"];
    let sa_out = run_batch(&sa, &test.inputs, 1).unwrap();
    let psa_out = run_batch(&psa, &test.inputs, 1).unwrap();
    let sa_ops = synops(&sa_out.record, &sa).unwrap().ops_of(&names);
    let psa_ops = synops(&psa_out.record, &psa).unwrap().ops_of(&names);
    assert!(psa_ops < sa_ops);

    let csv = |workers| {
        let out = run_batch(&psa, &test.inputs, workers).unwrap();
        let rows = metrics_rows("r", &psa, &out.record, 0.5).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(1), csv(3));
}
