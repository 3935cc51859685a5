mod common;

use common::*;
use tsdiff::evaluator::{align, evaluate_dataset, field_accuracies, interval_iou, Field, IOU_GATE};
use tsdiff::funclib::{FuncId, Interval, Param};
use tsdiff::schema::{DifferenceRecord, Magnitude, Presence};

#[test]
fn opr_upr_counting_fixture() {
    let (pred, gt) = opr_upr_fixture();
    assert_eq!(gt.len(), 10);
    assert_eq!(gt.values().map(Vec::len).sum::<usize>(), 12);
    let r = evaluate_dataset(&pred, &gt).unwrap();
    assert!((r.opr.unwrap() - 100.0 / 12.0).abs() < 1e-9);
    assert!((r.upr.unwrap() - 200.0 / 12.0).abs() < 1e-9);
    assert_eq!((r.counts.unmatched_pred, r.counts.unmatched_gt), (1, 2));
}

#[test]
fn func_accuracy_fixture_is_three_of_four() {
    let (pred, gt) = func_accuracy_fixture();
    let r = evaluate_dataset(&pred, &gt).unwrap();
    assert_eq!(r.field_acc.func, Some(75.0));
    assert_eq!(r.field_acc.diff_type, Some(100.0));
}

#[test]
fn empty_predictions_leave_everything_unmatched() {
    let g = tsdiff::Generator::new(tsdiff::GenConfig { seed: 4, ..Default::default() }).unwrap();
    let gt: Dataset = g.generate(100, false).unwrap().into_iter().map(|s| (s.id, s.pair.ground_truth)).collect();
    let pred: Dataset = gt.keys().map(|k| (k.clone(), vec![])).collect();
    let r = evaluate_dataset(&pred, &gt).unwrap();
    assert_eq!((r.upr, r.opr, r.counts.n_matched), (Some(100.0), Some(0.0), 0));
    assert!(Field::ALL.iter().all(|&f| r.field_acc.get(f).is_none()));
    assert_eq!(r.match_acc_overall, None);
}

#[test]
fn id_mismatch_names_the_ids() {
    let (mut pred, gt) = func_accuracy_fixture();
    pred.remove("s01");
    pred.insert("zz".into(), vec![]);
    let msg = evaluate_dataset(&pred, &gt).unwrap_err().to_string();
    assert!(msg.contains("s01") && msg.contains("zz"), "{msg}");
}

#[test]
fn iou_examples_and_properties() {
    let iv = Interval::new;
    assert_eq!(interval_iou(iv(36, 237), iv(36, 237)), 1.0);
    assert!((interval_iou(iv(10, 20), iv(15, 25)) - 5.0 / 15.0).abs() < 1e-12);
    assert!((interval_iou(iv(47, 237), iv(36, 237)) - 190.0 / 201.0).abs() < 1e-12);
    assert_eq!(interval_iou(iv(268, 268), iv(268, 268)), 1.0);
    assert_eq!(interval_iou(iv(5, 5), iv(9, 9)), 0.0);
    for a in 0..12 {
        for b in a..12 {
            for c in 0..12 {
                for d in c..12 {
                    let (x, y) = (iv(a, b), iv(c, d));
                    let v = interval_iou(x, y);
                    assert_eq!(v, interval_iou(y, x));
                    assert!((0.0..=1.0).contains(&v));
                    assert_eq!(v == 1.0, x == y, "{x:?} {y:?}");
                }
            }
        }
    }
}

#[test]
fn alignment_examples() {
    let p1 = t2(FuncId::Sinusoidal, 0, 99, Param::Amplitude, Magnitude::Larger);
    let p2 = t2(FuncId::Sawtooth, 200, 299, Param::Amplitude, Magnitude::Larger);
    let pred = t2(FuncId::SquareWave, 190, 299, Param::Amplitude, Magnitude::Larger);
    let al = align(&[pred], &[p1, p2]);
    assert_eq!(al.matches, vec![(0, 1)]);
    assert_eq!(al.unmatched_gt, vec![0]);

    let al = align(&[t1(FuncId::LinearIncrease, 0, 50)], &[t1(FuncId::Spike, 3, 3)]);
    assert!(al.positional);
    assert_eq!(al.matches, vec![(0, 0)]);
}

/// Every single-element prediction against every single-element truth
/// drawn from two categories: a match always exists, positional exactly
/// when the categories differ.
#[test]
fn single_element_alignment_brute_force() {
    let toys = [
        t1(FuncId::LinearIncrease, 10, 80),
        t1(FuncId::Sigmoid, 100, 250),
        t1(FuncId::Spike, 40, 40),
        t1(FuncId::PositivePulse, 200, 210),
    ];
    for p in &toys {
        for g in &toys {
            let al = align(std::slice::from_ref(p), std::slice::from_ref(g));
            assert_eq!(al.matches, vec![(0, 0)]);
            assert_eq!(al.positional, p.category() != g.category());
            assert!(al.unmatched_pred.is_empty() && al.unmatched_gt.is_empty());
        }
    }
}

/// Greedy matching agrees with an exhaustive search for the assignment
/// with the best IoU profile on small two-category lists.
#[test]
fn greedy_alignment_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let funcs = [FuncId::Sinusoidal, FuncId::Spike];
    let rec = |rng: &mut rand_chacha::ChaCha8Rng| {
        let s = rng.random_range(0..40);
        t1(funcs[rng.random_range(0..2)], s, s + rng.random_range(0..30))
    };
    for _ in 0..400 {
        let pred: Vec<_> = (0..rng.random_range(1..4)).map(|_| rec(&mut rng)).collect();
        let gt: Vec<_> = (0..rng.random_range(1..4)).map(|_| rec(&mut rng)).collect();
        let al = align(&pred, &gt);
        let mut seen_p = vec![false; pred.len()];
        let mut seen_g = vec![false; gt.len()];
        for &(p, g) in &al.matches {
            assert!(!seen_p[p] && !seen_g[g]);
            seen_p[p] = true;
            seen_g[g] = true;
        }
        assert!(al.matches.len() <= pred.len().min(gt.len()));
        let same = |p: usize, g: usize| pred[p].category() == gt[g].category();
        let best = max_same_category_matching(pred.len(), gt.len(), &same);
        if best == 0 {
            assert!(al.positional);
            assert_eq!(al.matches.len(), pred.len().min(gt.len()));
        } else {
            assert!(!al.positional);
            assert!(al.matches.iter().all(|&(p, g)| same(p, g)));
            // greedy over one pair at a time stays maximal within a category
            for (p, &sp) in seen_p.iter().enumerate() {
                for (g, &sg) in seen_g.iter().enumerate() {
                    assert!(!(same(p, g) && !sp && !sg), "left a matchable pair");
                }
            }
        }
    }
}

fn max_same_category_matching(np: usize, ng: usize, same: &dyn Fn(usize, usize) -> bool) -> usize {
    fn go(p: usize, np: usize, used: &mut Vec<bool>, same: &dyn Fn(usize, usize) -> bool) -> usize {
        if p == np {
            return 0;
        }
        let mut best = go(p + 1, np, used, same);
        for g in 0..used.len() {
            if !used[g] && same(p, g) {
                used[g] = true;
                best = best.max(1 + go(p + 1, np, used, same));
                used[g] = false;
            }
        }
        best
    }
    go(0, np, &mut vec![false; ng], same)
}

#[test]
fn corrupting_a_field_never_raises_accuracy() {
    let (_, gt) = opr_upr_fixture();
    let base_pred = gt.clone();
    let base = evaluate_dataset(&base_pred, &gt).unwrap();
    let corruptions: [fn(&mut DifferenceRecord); 4] = [
        |r| r.func = if r.func == FuncId::Spike { FuncId::Drop } else { FuncId::Spike },
        |r| r.presence = r.presence.map(|p| if p == Presence::Present { Presence::Absent } else { Presence::Present }),
        |r| r.magnitude = r.magnitude.map(|m| if m == Magnitude::Larger { Magnitude::Smaller } else { Magnitude::Larger }),
        |r| r.start = r.end,
    ];
    for (id, list) in &gt {
        for i in 0..list.len() {
            for c in corruptions {
                let mut pred = base_pred.clone();
                c(&mut pred.get_mut(id).unwrap()[i]);
                let r = evaluate_dataset(&pred, &gt).unwrap();
                for f in Field::ALL {
                    if let (Some(a), Some(b)) = (r.field_acc.get(f), base.field_acc.get(f)) {
                        assert!(a <= b);
                    }
                }
                assert!(r.match_acc_overall.unwrap_or(0.0) <= base.match_acc_overall.unwrap());
                assert!(r.mean_iou.unwrap_or(0.0) <= base.mean_iou.unwrap() + 1e-12);
            }
        }
    }
}

#[test]
fn gate_boundary() {
    let g = t1(FuncId::Sigmoid, 0, 100);
    let p = t1(FuncId::Sigmoid, 21, 100);
    assert!(interval_iou(p.interval(), g.interval()) < IOU_GATE);
    let al = align(std::slice::from_ref(&p), std::slice::from_ref(&g));
    assert_eq!(field_accuracies(&al, std::slice::from_ref(&p), std::slice::from_ref(&g))[&Field::Func], 100.0);
    let (overall, _) = tsdiff::evaluator::match_accuracy(&al, &[p], &[g], IOU_GATE);
    assert_eq!(overall, Some(0.0));
}
