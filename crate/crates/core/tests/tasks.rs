use std::collections::HashSet;
use std::path::Path;

use ntpt::arith::REGISTER_SIZE;
use ntpt::tasks::*;
use ntpt::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn glyphs_are_deterministic_and_seed_dependent() {
    for class in 0..NUM_SYMBOLS {
        let a = render_glyph(class, 11);
        assert_eq!(a, render_glyph(class, 11));
        assert_ne!(a, render_glyph(class, 12));
        assert_eq!(a.len(), IMAGE_PIXELS);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn default_glyph_style_matches_plain_renderer() {
    let hard = GlyphStyle { jitter: 2.0, noise: 0.2 };
    for class in 0..NUM_SYMBOLS {
        assert_eq!(render_glyph(class, 5), render_glyph_styled(class, 5, GlyphStyle::default()));
        let t = render_glyph_styled(class, 3, hard);
        assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
    let a = SymbolSource::synthetic_styled(0, 3, 1, hard);
    let b = SymbolSource::synthetic(0, 3, 1);
    assert_eq!(a.count(Split::Train, 0), b.count(Split::Train, 0));
    assert_ne!(a.image(Split::Train, 0, 0), b.image(Split::Train, 0, 0));
}

#[test]
fn plus_glyph_has_enough_ink() {
    for seed in 0..200 {
        let t = render_glyph(10, seed);
        let bright = t.data().iter().filter(|&&v| v > 0.5).count();
        assert!(bright >= 30, "seed {seed}: {bright} bright pixels");
    }
}

fn idx_bytes(images: &[[u8; 4]], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut im = Vec::new();
    im.extend(IMAGES_MAGIC.to_be_bytes());
    im.extend((images.len() as u32).to_be_bytes());
    im.extend(2u32.to_be_bytes());
    im.extend(2u32.to_be_bytes());
    for i in images {
        im.extend(i);
    }
    let mut lb = Vec::new();
    lb.extend(LABELS_MAGIC.to_be_bytes());
    lb.extend((labels.len() as u32).to_be_bytes());
    lb.extend(labels);
    (im, lb)
}

#[test]
fn idx_fixture_parses() {
    let (im, lb) = idx_bytes(&[[0, 255, 0, 0], [255; 4], [0; 4], [51, 102, 153, 204]], &[3, 1, 4, 1]);
    assert_eq!(im.len(), 16 + 16);
    let d = parse_idx(&im, Path::new("im"), &lb, Path::new("lb")).unwrap();
    assert_eq!(d.images.len(), 4);
    assert_eq!((d.rows, d.cols), (2, 2));
    assert_eq!(d.labels, vec![3, 1, 4, 1]);
    assert_eq!(d.images[0], vec![0.0, 1.0, 0.0, 0.0]);
    assert!((d.images[3][0] - 0.2).abs() < 1e-12);
}

#[test]
fn idx_errors_carry_offsets() {
    let (im, lb) = idx_bytes(&[[1; 4], [2; 4]], &[0, 1]);
    match parse_idx(&im[..21], Path::new("im"), &lb, Path::new("lb")).unwrap_err() {
        Error::Idx { offset, reason, .. } => {
            assert_eq!(offset, 21);
            assert!(reason.contains("from offset 16"), "{reason}");
        }
        e => panic!("{e:?}"),
    }
    match parse_idx(&im[..10], Path::new("im"), &lb, Path::new("lb")).unwrap_err() {
        Error::Idx { offset, .. } => assert_eq!(offset, 8),
        e => panic!("{e:?}"),
    }
    let (_, lb3) = idx_bytes(&[], &[0, 1, 2]);
    match parse_idx(&im, Path::new("im"), &lb3, Path::new("lb")).unwrap_err() {
        Error::Idx { offset, reason, .. } => {
            assert_eq!(offset, 4);
            assert!(reason.contains("3 labels for 2 images"));
        }
        e => panic!("{e:?}"),
    }
    let (_, empty) = idx_bytes(&[], &[]);
    assert!(parse_idx(&im, Path::new("im"), &empty, Path::new("lb")).is_err());
    let mut bad = im.clone();
    bad[3] = 0x01;
    match parse_idx(&bad, Path::new("im"), &lb, Path::new("lb")).unwrap_err() {
        Error::Idx { offset, .. } => assert_eq!(offset, 0),
        e => panic!("{e:?}"),
    }
}

#[test]
fn load_idx_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let (im, lb) = idx_bytes(&[[9; 4]], &[7]);
    std::fs::write(dir.path().join("i"), im).unwrap();
    std::fs::write(dir.path().join("l"), lb).unwrap();
    let d = load_idx(&dir.path().join("i"), &dir.path().join("l")).unwrap();
    assert_eq!(d.labels, vec![7]);
    assert!(matches!(load_idx(&dir.path().join("missing"), &dir.path().join("l")), Err(Error::Io { .. })));
}

fn digit(c: char) -> usize {
    c.to_digit(10).unwrap() as usize
}

fn op(c: char) -> usize {
    OPERATOR_BASE + ['+', '-', '*', '/'].iter().position(|&o| o == c).unwrap()
}

#[test]
fn ground_truth_examples() {
    // Grid cells are NW, NE, SW, SE.
    assert_eq!(ground_truth(TaskId::add(Variant::Top), &[3, 4, 9, 9], &[]).unwrap(), 7);
    assert_eq!(ground_truth(TaskId::add(Variant::Right), &[3, 4, 9, 9], &[]).unwrap(), 13);
    let grid = [op('+'), op('*'), op('/'), op('-')];
    assert_eq!(ground_truth(TaskId::apply(Variant::Left), &grid, &[5, 0, 2]).unwrap(), 2);
    let expr: Vec<usize> = "5-6+4".chars().map(|c| if c.is_ascii_digit() { digit(c) } else { op(c) }).collect();
    assert_eq!(ground_truth(TaskId::MATH, &expr, &[]).unwrap(), 3);
    let expr = [3, op('+'), 4, op('*'), 2];
    assert_eq!(eval_left_to_right(&expr).unwrap(), 14);
    assert!(eval_left_to_right(&[3, op('+')]).is_err());
}

#[test]
fn task_names_round_trip() {
    for t in TaskId::grid_tasks().into_iter().chain([TaskId::MATH]) {
        assert_eq!(t.to_string().parse::<TaskId>().unwrap(), t);
    }
    assert!("add2x2/middle".parse::<TaskId>().is_err());
}

#[test]
fn generated_examples_are_well_formed() {
    let source = SymbolSource::synthetic(0, 5, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for task in TaskId::grid_tasks() {
        for _ in 0..200 {
            let e = gen_example(task, &source, Split::Test, 0, &mut rng).unwrap();
            assert!(e.label < REGISTER_SIZE);
            assert_eq!(e.label, ground_truth(task, &e.classes(), &e.aux).unwrap());
        }
    }
    for n in 1..=6 {
        let e = gen_example(TaskId::MATH, &source, Split::Train, n, &mut rng).unwrap();
        assert_eq!(e.symbols.len(), 2 * n - 1);
        assert!(e.label < REGISTER_SIZE);
    }
}

#[test]
fn pool_cap_limits_distinct_examples() {
    let source = SymbolSource::synthetic(0, 20, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stream = ExampleStream::new(TaskId::add(Variant::Top), &source, 0, Some(1000), &mut rng).unwrap();
    let distinct: HashSet<_> = (0..20_000).map(|_| stream.draw(&source, &mut rng).unwrap().symbols).collect();
    assert!(distinct.len() <= 1000);
}

#[test]
fn generation_is_deterministic() {
    let source = SymbolSource::synthetic(0, 10, 2);
    let stream = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| gen_example(TaskId::apply(Variant::Bottom), &source, Split::Train, 0, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(stream(4), stream(4));
    assert_ne!(stream(4), stream(5));
}

#[test]
fn train_and_test_pools_are_disjoint() {
    let source = SymbolSource::synthetic(3, 30, 30);
    for class in 0..NUM_SYMBOLS {
        let train: HashSet<Vec<u64>> = (0..30)
            .map(|i| source.image(Split::Train, class, i).iter().map(|v| v.to_bits()).collect())
            .collect();
        for i in 0..30 {
            let t: Vec<u64> = source.image(Split::Test, class, i).iter().map(|v| v.to_bits()).collect();
            assert!(!train.contains(&t));
        }
    }
}

#[test]
fn schedule_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = Schedule::lifelong(100);
    for step in 0..100 {
        assert_eq!(s.sample_task(step, &mut rng), TaskId::add(Variant::Top));
    }
    assert_eq!(s.phase_at(10_000), 7);
    assert_eq!(s.phases()[7].probs, s.phases()[s.phase_at(10_000)].probs);

    // Phase 2 of a two-phase schedule over three tasks, chi-square with two
    // degrees of freedom, whose survival function is exp(-x / 2).
    let tasks = vec![TaskId::add(Variant::Top), TaskId::add(Variant::Left), TaskId::add(Variant::Bottom)];
    let probs = [0.2, 0.3, 0.5];
    let s = Schedule::new(
        tasks.clone(),
        vec![Phase { steps: 10, probs: vec![1.0, 0.0, 0.0] }, Phase { steps: 10, probs: probs.to_vec() }],
    )
    .unwrap();
    let draws = 10_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let t = s.sample_task(15, &mut rng);
        counts[tasks.iter().position(|&x| x == t).unwrap()] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = (-chi2 / 2.0).exp();
    assert!(p_value > 0.01, "chi2 {chi2}, p {p_value}");

    // Beyond the end, the last distribution applies.
    let mut counts = [0usize; 3];
    for _ in 0..1000 {
        let t = s.sample_task(1_000_000, &mut rng);
        counts[tasks.iter().position(|&x| x == t).unwrap()] += 1;
    }
    assert!(counts.iter().all(|&c| c > 0));
}

#[test]
fn schedule_validation() {
    let t = vec![TaskId::MATH];
    assert!(Schedule::new(t.clone(), vec![Phase { steps: 0, probs: vec![1.0] }]).is_err());
    assert!(Schedule::new(t.clone(), vec![Phase { steps: 5, probs: vec![0.9] }]).is_err());
    assert!(Schedule::new(t, vec![]).is_err());
    let s = Schedule::lifelong(10);
    for p in s.phases() {
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(s.own_phase_of(TaskId::add(Variant::Top)), Some(0));
    assert_eq!(s.own_phase_of(TaskId::apply(Variant::Right)), Some(7));
    assert_eq!(s.seen_by(25).len(), 3);
}
