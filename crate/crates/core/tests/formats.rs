mod common;

use std::path::PathBuf;

use phasor_snn::data::{load_split, parse_idx_images, parse_idx_labels, DataError, Manifest, Split};
use phasor_snn::harness::csvio::{parse_csv, to_csv_string, SWEEP_HEADER};
use phasor_snn::harness::{render_svg, HarnessError, SweepRecord};
use phasor_snn::phasor::PhasorNetwork;
use phasor_snn::trainer::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sample_checkpoint() -> Checkpoint {
    Checkpoint::from_network(&PhasorNetwork::new(784, 48, 20, 10, 17).unwrap())
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let c = sample_checkpoint();
    let bytes = c.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_bytes().unwrap(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.phzr");
    save_checkpoint(&c, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(load_checkpoint(&path).unwrap(), c);

    // f32 weights survive the network rebuild unchanged
    let net = back.to_network().unwrap();
    assert_eq!(Checkpoint::from_network(&net).to_bytes().unwrap(), bytes);
}

#[test]
fn corrupted_checkpoints_give_typed_errors() {
    let bytes = sample_checkpoint().to_bytes().unwrap();

    for at in [40, bytes.len() / 2, bytes.len() - 5] {
        let mut b = bytes.clone();
        b[at] ^= 0x10;
        assert!(matches!(Checkpoint::from_bytes(&b), Err(CheckpointError::Checksum { .. })), "flip at {at}");
    }
    let mut b = bytes.clone();
    b[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&b), Err(CheckpointError::BadMagic(_))));
    let mut b = bytes.clone();
    b[4] = 99;
    assert!(matches!(Checkpoint::from_bytes(&b), Err(CheckpointError::VersionMismatch(99))));
    for len in [0, 3, 7, 20, bytes.len() - 1] {
        assert!(
            matches!(Checkpoint::from_bytes(&bytes[..len]), Err(CheckpointError::Truncated { .. })),
            "len {len}"
        );
    }
    let mut b = bytes.clone();
    b.push(0);
    assert!(matches!(Checkpoint::from_bytes(&b), Err(CheckpointError::DimensionMismatch(_))));

    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_checkpoint(dir.path().join("absent.phzr")), Err(CheckpointError::Io(_))));
}

#[test]
fn fashion_mnist_splits_have_the_expected_shape() {
    let dir = workspace().join("data/fashion");
    let train = load_split(&dir, Split::Train).unwrap();
    let test = load_split(&dir, Split::Test).unwrap();
    assert_eq!((train.len(), test.len()), (60000, 10000));
    assert_eq!((train.images.rows, train.images.cols), (28, 28));
    assert_eq!((test.images.rows, test.images.cols), (28, 28));
    assert!(train.labels.labels.iter().chain(&test.labels.labels).all(|&l| l < 10));
}

#[test]
fn shipped_manifest_parses() {
    let m = Manifest::load(workspace().join("data/fashion.manifest")).unwrap();
    assert_eq!(m.entries.len(), 4);
    assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
}

#[test]
fn corrupted_idx_fixtures_give_typed_errors() {
    let mut good = Vec::new();
    for v in [2051u32, 1, 2, 2] {
        good.extend_from_slice(&v.to_be_bytes());
    }
    good.extend_from_slice(&[0, 64, 128, 255]);
    assert_eq!(good.len(), 20);
    assert_eq!(parse_idx_images(&good).unwrap().pixels, vec![0, 64, 128, 255]);

    let mut bad_magic = good.clone();
    bad_magic[3] = 0x01;
    assert!(matches!(parse_idx_images(&bad_magic), Err(DataError::BadMagic { expected: 2051, got: 2049 })));
    assert!(matches!(parse_idx_images(&good[..19]), Err(DataError::Truncated { got: 19, need: 20 })));
    assert!(matches!(parse_idx_images(&good[..10]), Err(DataError::Truncated { .. })));
    let mut long = good.clone();
    long.push(7);
    assert!(matches!(parse_idx_images(&long), Err(DataError::TrailingBytes { extra: 1 })));

    let labels = [0, 0, 8, 1, 0, 0, 0, 2, 3, 10];
    assert!(matches!(parse_idx_labels(&labels), Err(DataError::LabelOutOfRange { index: 1, value: 10 })));
    assert!(matches!(parse_idx_labels(&labels[..9]), Err(DataError::Truncated { .. })));

    let bad_manifest = "a.gz\tfile:///x\tnothex\t10\n";
    assert!(matches!(Manifest::parse(bad_manifest), Err(DataError::Manifest { line: 1, .. })));
}

fn sweep_rows() -> Vec<SweepRecord> {
    (0..11)
        .map(|i| {
            let p = i as f64 / 5.0;
            let acc = 0.86 - 0.05 * i as f64;
            SweepRecord {
                method: "explicit".into(),
                parameter: p,
                fraction_removed: p / 2.0,
                accuracy: acc,
                relative_accuracy: acc / 0.86,
                n_images: 1000,
                seed: 0,
            }
        })
        .collect()
}

#[test]
fn sweep_csv_matches_its_schema() {
    let rows = sweep_rows();
    let text = to_csv_string(&rows, SWEEP_HEADER);
    assert_eq!(common::validate_sweep_csv(&text), Ok(11));
    let back: Vec<SweepRecord> = parse_csv(&text, SWEEP_HEADER, "sweep.csv").unwrap();
    assert_eq!(back, rows);

    let swapped = text.replacen("method,parameter", "parameter,method", 1);
    assert!(matches!(parse_csv::<SweepRecord>(&swapped, SWEEP_HEADER, "s"), Err(HarnessError::Csv { line: 1, .. })));
    let broken = text.replacen(",1000,", ",many,", 1);
    assert!(matches!(parse_csv::<SweepRecord>(&broken, SWEEP_HEADER, "s"), Err(HarnessError::Csv { line: 2, .. })));
}

#[test]
fn figure_svg_is_well_formed() {
    let mut random = sweep_rows();
    for r in &mut random {
        r.method = "random".into();
        r.relative_accuracy *= 1.2; // exceeds the y range and must be clamped
    }
    let svg = render_svg(&[("explicit".into(), sweep_rows()), ("random".into(), random)]).unwrap();
    assert_eq!(common::validate_svg(&svg), Ok(2));
    assert!(render_svg(&[]).is_err());
}
