//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use nalgebra::Matrix3;
use rand::Rng;
use rayon::prelude::*;

use common::*;
use regtrack::am::{AmKind, AppearanceModel, Side};
use regtrack::eval::{
    alignment_error, default_thresholds, init_frames, pooled_errors, project_ground_truth,
    run_multi_init, run_reinit, run_single, sr_curve, success_rate, GroundTruth, RunOptions,
    REINIT_SKIP, REINIT_THRESHOLD,
};
use regtrack::image::PixelCoords;
use regtrack::sm::{build_tracker, SmKind, Tracker, TrackerConfig};
use regtrack::ssm::{sl3, CornersBox, Ssm, SsmKind, WarpParams};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn fd_patches(rng: &mut impl Rng, kind: AmKind) -> (Vec<f64>, Vec<f64>) {
    match kind {
        AmKind::Scv | AmKind::Rscv => (binned_patch(rng, 64), binned_patch(rng, 64)),
        _ => (
            random_patch(rng, 64, 10.0, 245.0),
            random_patch(rng, 64, 10.0, 245.0),
        ),
    }
}

fn derivative_correctness() -> Verdict {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst_grad: f64 = 0.0;
    let mut worst_kind = AmKind::Ssd;
    for kind in AmKind::ALL {
        let am = AppearanceModel::new(kind);
        for _ in 0..100 {
            let (t, c) = fd_patches(&mut r, kind);
            let analytic = am.gradient(&t, &c, Side::Candidate).unwrap();
            let fd = central_gradient(|x| am.similarity(&t, x).unwrap(), &c, 1e-3);
            let analytic_t = am.gradient(&t, &c, Side::Template).unwrap();
            let fd_t = central_gradient(|x| am.similarity(x, &c).unwrap(), &t, 1e-3);
            let e = rel_l2(&analytic, &fd).max(rel_l2(&analytic_t, &fd_t));
            if e > worst_grad {
                worst_grad = e;
                worst_kind = kind;
            }
        }
    }
    let mut worst_hess: f64 = 0.0;
    for kind in [AmKind::Ssim, AmKind::Spss] {
        let am = AppearanceModel::new(kind);
        for _ in 0..100 {
            let t = random_patch(&mut r, 64, 10.0, 245.0);
            let c = random_patch(&mut r, 64, 10.0, 245.0);
            let h = am.hessian_full(&t, &c).unwrap().to_dense();
            let fd = central_jacobian(|x| am.gradient(&t, x, Side::Candidate).unwrap(), &c, 1e-3);
            let fd_sym = (&fd + fd.transpose()) / 2.0;
            worst_hess = worst_hess.max((&h - &fd_sym).norm() / fd_sym.norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_grad < 1e-4 && worst_hess < 1e-3 && secs < 30.0,
        format!(
            "max gradient rel err {worst_grad:.2e} ({worst_kind}), max Hessian rel err {worst_hess:.2e}, {secs:.1}s"
        ),
    )
}

fn self_hessian_identity() -> Verdict {
    let mut r = rng(202);
    let mut worst_abs: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for kind in [AmKind::Ssim, AmKind::Spss] {
        let am = AppearanceModel::new(kind);
        for _ in 0..100 {
            let i = random_patch(&mut r, 64, 0.0, 255.0);
            let a = am.self_hessian(&i).unwrap().to_dense();
            let b = am.hessian_full(&i, &i).unwrap().to_dense();
            let d = &a - &b;
            worst_abs = worst_abs.max(d.abs().max());
            worst_rel = worst_rel.max(d.norm() / b.norm());
        }
    }
    verdict(
        worst_abs <= 1e-9 && worst_rel <= 1e-9,
        format!("max |diff| {worst_abs:.2e}, max rel {worst_rel:.2e}"),
    )
}

fn stationarity() -> Verdict {
    let mut r = rng(303);
    let mut worst: f64 = 0.0;
    for kind in AmKind::ALL {
        let am = AppearanceModel::new(kind);
        for _ in 0..100 {
            let i = random_patch(&mut r, 64, 0.0, 255.0);
            for side in [Side::Candidate, Side::Template] {
                let g = am.gradient(&i, &i, side).unwrap();
                worst = worst.max(g.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
    }
    verdict(
        worst <= 1e-9,
        format!("max |gradient| at perfect match {worst:.2e} over 7 models"),
    )
}

fn ssim_algebra() -> Verdict {
    let am = AppearanceModel::new(AmKind::Ssim);
    let mut r = rng(404);
    let mut asymmetric = 0;
    let mut out_of_bounds = 0;
    for k in 0..10_000 {
        let a = random_patch(&mut r, 64, 0.0, 255.0);
        let b = match k % 3 {
            0 => random_patch(&mut r, 64, 0.0, 255.0),
            1 => a.iter().map(|v| 255.0 - v).collect(),
            _ => a
                .iter()
                .map(|v| 0.5 * v + r.random_range(-5.0..5.0))
                .collect(),
        };
        let ab = am.similarity(&a, &b).unwrap();
        let ba = am.similarity(&b, &a).unwrap();
        asymmetric += usize::from(ab != ba);
        out_of_bounds += usize::from(!(ab.abs() <= 1.0));
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let oracle = (2.0 * 50.0 * 100.0 + c1) / (50.0f64.powi(2) + 100.0f64.powi(2) + c1);
    let f = am.similarity(&[50.0; 64], &[100.0; 64]).unwrap();
    verdict(
        asymmetric == 0 && out_of_bounds == 0 && (f - oracle).abs() < 1e-12 && (f - 0.800104).abs() < 5e-7,
        format!("{asymmetric} asymmetric, {out_of_bounds} out of [-1, 1] in 10000 pairs; constant (50, 100) = {f:.6}"),
    )
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn zncc_ncc() -> Verdict {
    let ncc = AppearanceModel::new(AmKind::Ncc);
    let zncc = AppearanceModel::new(AmKind::Zncc);
    let n = 64.0;
    let mut r = rng(505);
    let mut worst: f64 = 0.0;
    let mut disagreements = 0;
    for _ in 0..1000 {
        let t = random_patch(&mut r, 64, 0.0, 255.0);
        let mut fz = Vec::with_capacity(100);
        let mut fn_ = Vec::with_capacity(100);
        for _ in 0..100 {
            let gain = r.random_range(0.2..2.0);
            let noise = r.random_range(1.0..80.0);
            let c: Vec<f64> = t
                .iter()
                .map(|v| gain * v + r.random_range(-noise..noise))
                .collect();
            let a = zncc.similarity(&t, &c).unwrap();
            let b = ncc.similarity(&t, &c).unwrap();
            worst = worst.max((a + 2.0 * (n - 1.0) * (1.0 - b)).abs());
            fz.push(a);
            fn_.push(b);
        }
        disagreements += usize::from(argmax(&fz) != argmax(&fn_));
    }
    verdict(
        worst <= 1e-6 && disagreements == 0,
        format!("max affine-relation residual {worst:.2e}, {disagreements} argmax disagreements in 1000 trials"),
    )
}

fn random_params(r: &mut impl Rng, ssm: &Ssm) -> WarpParams {
    let kind = ssm.kind();
    let values = match kind {
        SsmKind::Translation => vec![r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)],
        SsmKind::Isometry => vec![
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-0.2..0.2),
        ],
        SsmKind::Similitude => vec![
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-0.1..0.1),
            r.random_range(-0.2..0.2),
        ],
        SsmKind::Affine => vec![
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-0.05..0.05),
            r.random_range(-0.05..0.05),
            r.random_range(-0.05..0.05),
            r.random_range(-0.05..0.05),
        ],
        _ => return ssm.params_from_matrix(&random_homography(r)).unwrap(),
    };
    WarpParams::new(kind, values).unwrap()
}

/// A mild projective warp about the image region the tests use.
fn random_homography(r: &mut impl Rng) -> Matrix3<f64> {
    let mut e = Matrix3::zeros();
    for i in 0..2 {
        for j in 0..2 {
            e[(i, j)] = r.random_range(-0.05..0.05);
        }
        e[(i, 2)] = r.random_range(-5.0..5.0);
        e[(2, i)] = r.random_range(-5e-4..5e-4);
    }
    let c = Matrix3::new(1.0, 0.0, -100.0, 0.0, 1.0, -100.0, 0.0, 0.0, 1.0);
    let c_inv = Matrix3::new(1.0, 0.0, 100.0, 0.0, 1.0, 100.0, 0.0, 0.0, 1.0);
    c_inv * (Matrix3::identity() + e) * c
}

fn ssm_suite() -> Verdict {
    let base = CornersBox::axis_aligned(60.0, 70.0, 140.0, 130.0);
    let mut r = rng(606);
    let mut failures = Vec::new();
    let mut worst_group: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    for kind in SsmKind::ALL {
        let ssm = Ssm::new(kind, base);
        let id = ssm.identity();
        for _ in 0..100 {
            let x = random_points(&mut r, 100, 0.0, 200.0);
            let (p, q, s) = (
                random_params(&mut r, &ssm),
                random_params(&mut r, &ssm),
                random_params(&mut r, &ssm),
            );
            let w = |p: &WarpParams| ssm.warp_points(p, &x).unwrap();
            let left = ssm.compose(&ssm.compose(&p, &q).unwrap(), &s).unwrap();
            let right = ssm.compose(&p, &ssm.compose(&q, &s).unwrap()).unwrap();
            let nested = ssm.warp_points(&p, &w(&q)).unwrap();
            let inv = ssm.invert(&p).unwrap();
            let gaps = [
                max_point_gap(&w(&left), &w(&right)),
                max_point_gap(&w(&ssm.compose(&p, &q).unwrap()), &nested),
                max_point_gap(&w(&ssm.compose(&p, &id).unwrap()), &w(&p)),
                max_point_gap(&w(&ssm.compose(&id, &p).unwrap()), &w(&p)),
                max_point_gap(&w(&ssm.compose(&p, &inv).unwrap()), &x),
                max_point_gap(&w(&ssm.compose(&inv, &p).unwrap()), &x),
            ];
            let g = gaps.iter().cloned().fold(0.0, f64::max);
            worst_group = worst_group.max(g);
            if g > 1e-9 {
                failures.push(format!("{kind} group law gap {g:.2e}"));
            }
            let jac = ssm.warp_jacobian(&p, &x).unwrap();
            let fd = central_jacobian(
                |v| {
                    let pv = WarpParams::new(kind, v.to_vec()).unwrap();
                    ssm.warp_points(&pv, &x)
                        .unwrap()
                        .points()
                        .iter()
                        .flat_map(|pt| [pt.x, pt.y])
                        .collect()
                },
                p.values(),
                1e-6,
            );
            let mut num = 0.0;
            for k in 0..x.len() {
                for i in 0..kind.dof() {
                    num += (jac.dx(k, i) - fd[(2 * k, i)]).powi(2)
                        + (jac.dy(k, i) - fd[(2 * k + 1, i)]).powi(2);
                }
            }
            let e = num.sqrt() / fd.norm();
            worst_jac = worst_jac.max(e);
            if e >= 1e-5 {
                failures.push(format!("{kind} Jacobian rel err {e:.2e}"));
            }
        }
    }
    let mut worst_det: f64 = 0.0;
    for _ in 0..100 {
        let v: Vec<f64> = (0..8).map(|_| r.random_range(-0.1..=0.1)).collect();
        worst_det = worst_det.max((sl3::exp(&v).determinant() - 1.0).abs());
    }
    if worst_det > 1e-9 {
        failures.push(format!("sl3 determinant off by {worst_det:.2e}"));
    }
    let mut worst_equiv: f64 = 0.0;
    for _ in 0..100 {
        let m = random_homography(&mut r);
        let x = random_points(&mut r, 100, 0.0, 200.0);
        let warped: Vec<PixelCoords> = [SsmKind::Homography, SsmKind::Sl3, SsmKind::Corners]
            .iter()
            .map(|&k| {
                let ssm = Ssm::new(k, base);
                ssm.warp_points(&ssm.params_from_matrix(&m).unwrap(), &x)
                    .unwrap()
            })
            .collect();
        worst_equiv = worst_equiv
            .max(max_point_gap(&warped[0], &warped[1]))
            .max(max_point_gap(&warped[0], &warped[2]));
    }
    if worst_equiv > 1e-6 {
        failures.push(format!("8-DOF kinds disagree by {worst_equiv:.2e}"));
    }
    let mut worst_embed: f64 = 0.0;
    let sim = Ssm::new(SsmKind::Similitude, base);
    for _ in 0..100 {
        let p = random_params(&mut r, &sim);
        let x = random_points(&mut r, 100, 0.0, 200.0);
        let m = sim.matrix(&p).unwrap();
        let reference = sim.warp_points(&p, &x).unwrap();
        for k in [SsmKind::Affine, SsmKind::Homography] {
            let ssm = Ssm::new(k, base);
            let y = ssm
                .warp_points(&ssm.params_from_matrix(&m).unwrap(), &x)
                .unwrap();
            worst_embed = worst_embed.max(max_point_gap(&reference, &y));
        }
    }
    if worst_embed > 1e-9 {
        failures.push(format!("similitude embedding gap {worst_embed:.2e}"));
    }
    verdict(
        failures.is_empty(),
        format!(
            "group {worst_group:.1e}, Jacobian {worst_jac:.1e}, sl3 det {worst_det:.1e}, 8-DOF equivalence {worst_equiv:.1e}, embedding {worst_embed:.1e}; {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn synthetic_convergence() -> Verdict {
    let start = Instant::now();
    let source = harness_texture();
    let init = harness_box();
    let mut r = rng(707);
    let trials: Vec<_> = (0..200)
        .map(|k| {
            let err = r.random_range(0.0..=5.0);
            let target = displaced_box(&mut r, &init, err);
            render_sequence(&source, &init, &[init, target], vec![], 0.0, k)
        })
        .collect();
    let cfg = TrackerConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (sm, need) in [
        (SmKind::Fclk, 0.9),
        (SmKind::Esm, 0.9),
        (SmKind::Iclk, 0.8),
        (SmKind::Falk, 0.8),
        (SmKind::Ialk, 0.8),
    ] {
        let ok = trials
            .par_iter()
            .filter(|(frames, gt)| {
                let mut t = build_tracker(AmKind::Ssim, SsmKind::Homography, sm, &cfg).unwrap();
                t.initialize(&frames[0], gt.get(0)).unwrap();
                let o = t.update(&frames[1]).unwrap();
                o.iterations <= 30 && alignment_error(gt.get(1), &o.corners) < 0.5
            })
            .count();
        let rate = ok as f64 / trials.len() as f64;
        pass &= rate >= need;
        lines.push(format!("{sm} {ok}/200"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(pass, format!("{}, {secs:.1}s", lines.join(", ")))
}

/// `n` boxes jumping `jump` px per frame around `init` (plus 1 px of
/// projective jitter), never straying more than 25 px from it.
fn jump_sequence(r: &mut impl Rng, init: &CornersBox, n: usize, jump: f64) -> Vec<CornersBox> {
    let mut out = vec![*init];
    let mut off = (0.0f64, 0.0f64);
    while out.len() < n {
        let th: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let cand = (off.0 + jump * th.cos(), off.1 + jump * th.sin());
        if cand.0.hypot(cand.1) > 25.0 {
            continue;
        }
        off = cand;
        let b = displaced_box(r, init, 1.0);
        out.push(shifted(&b, off.0, off.1));
    }
    out
}

fn sr_of(
    sm: SmKind,
    am: AmKind,
    frames: &[regtrack::image::GrayImage],
    gt: &GroundTruth,
    t_p: f64,
) -> f64 {
    let cfg = TrackerConfig::default();
    let factory = || build_tracker(am, SsmKind::Homography, sm, &cfg);
    let run = run_single(&factory, frames, gt, 0, &RunOptions::default()).unwrap();
    success_rate(&run.errors(), t_p).unwrap()
}

fn basin_ordering() -> Verdict {
    let init = harness_box();
    let mut r = rng(21);
    let targets = jump_sequence(&mut r, &init, 100, 10.0);
    let (frames, gt) = render_sequence(&fine_texture(), &init, &targets, vec![], 0.0, 2);
    let sr = |sm| sr_of(sm, AmKind::Ssim, &frames, &gt, 2.0);
    let (iclk, fclk) = (sr(SmKind::Iclk), sr(SmKind::Fclk));
    let (nnic, pffc, rklt) = (sr(SmKind::Nnic), sr(SmKind::Pffc), sr(SmKind::Rklt));
    verdict(
        nnic > iclk && pffc > fclk && rklt > fclk,
        format!(
            "SR(2): nnic {nnic:.3} vs iclk {iclk:.3}, pffc {pffc:.3} vs fclk {fclk:.3}, rklt {rklt:.3} vs fclk {fclk:.3}"
        ),
    )
}

fn illumination() -> Verdict {
    let init = harness_box();
    let mut r = rng(31);
    let mut targets = vec![init];
    let mut photometric = vec![(1.0, 0.0)];
    for _ in 1..100 {
        let e = r.random_range(0.0..2.0);
        targets.push(displaced_box(&mut r, &init, e));
        photometric.push((r.random_range(0.6..=1.4), r.random_range(-30.0..=30.0)));
    }
    let (frames, gt) = render_sequence(&harness_texture(), &init, &targets, photometric, 0.0, 3);
    let sr = |am| sr_of(SmKind::Fclk, am, &frames, &gt, 5.0);
    let (ssd, ssim, ncc) = (sr(AmKind::Ssd), sr(AmKind::Ssim), sr(AmKind::Ncc));
    verdict(
        ssim >= ssd + 0.2 && ncc >= ssd + 0.2,
        format!("SR(5): ssim {ssim:.3}, ncc {ncc:.3}, ssd {ssd:.3}"),
    )
}

fn evaluation_protocol() -> Verdict {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    let errs = [1.0, 3.0, 7.0, 25.0];
    check(success_rate(&errs, 5.0).unwrap() == 0.5, "SR(5)");
    check(success_rate(&errs, 20.0).unwrap() == 0.75, "SR(20)");
    check(success_rate(&errs, 0.0).unwrap() == 0.0, "SR(0)");
    let grid = default_thresholds();
    check(grid.len() == 41 && grid[40] == 20.0, "threshold grid");
    let zero = sr_curve(&[0.0; 5], &grid).unwrap();
    check(
        zero.rates[0] == 0.0 && zero.rates[1..].iter().all(|&v| v == 1.0),
        "all-zero curve",
    );
    check(zero.auc == 40.0 / 41.0, "all-zero AUC");
    check(
        sr_curve(&[100.0; 5], &grid).unwrap().auc == 0.0,
        "all-100 AUC",
    );
    let above = grid.iter().filter(|&&t| t > 5.0).count() as f64;
    check(
        sr_curve(&[5.0; 4], &grid).unwrap().auc == above / 41.0,
        "step AUC",
    );

    check(
        init_frames(100) == vec![0, 9, 19, 29, 39, 49, 59, 69, 79, 89],
        "init spacing, 100 frames",
    );
    check(
        init_frames(10) == (0..10).collect::<Vec<_>>(),
        "init spacing, 10 frames",
    );

    // Tracker replaying a script of boxes 0, 1, ..., 30 px off the ground truth.
    let len = 31;
    let base = CornersBox::axis_aligned(10.0, 10.0, 50.0, 40.0);
    let gt = GroundTruth::new((0..len).map(|t| shifted(&base, t as f64, 0.0)).collect()).unwrap();
    let script: Vec<CornersBox> = (0..len)
        .map(|t| shifted(gt.get(t), 0.0, t as f64))
        .collect();
    let frames = index_frames(len);
    let opts = RunOptions::default();
    let replay =
        || -> regtrack::Result<Box<dyn Tracker>> { Ok(Box::new(Scripted::new(script.clone()))) };
    let runs = run_multi_init(&replay, &frames, &gt, &opts).unwrap();
    let pooled = pooled_errors(&runs);
    let inits = init_frames(len);
    let expected: Vec<f64> = inits
        .iter()
        .flat_map(|&s| (s + 1..len).map(|t| t as f64))
        .collect();
    check(pooled == expected, "multi-init pooled errors");
    let weighted: f64 = runs
        .iter()
        .map(|r| success_rate(&r.errors(), 12.0).unwrap() * r.records.len() as f64)
        .sum::<f64>()
        / pooled.len() as f64;
    check(
        (success_rate(&pooled, 12.0).unwrap() - weighted).abs() < 1e-15,
        "pooled SR bookkeeping",
    );

    // A tracker pinned to its initialization box while the object drifts.
    let drift = |len: usize, speed: f64| {
        GroundTruth::new(
            (0..len)
                .map(|t| shifted(&base, speed * t as f64, 0.0))
                .collect(),
        )
        .unwrap()
    };
    let pinned =
        || -> regtrack::Result<Box<dyn Tracker>> { Ok(Box::new(Scripted::new(Vec::new()))) };
    let simulate = |gt: &GroundTruth| {
        let (mut count, mut frames_scored, mut init) = (0, Vec::new(), 0);
        let mut t = 1;
        while t < gt.len() {
            let e = alignment_error(gt.get(t), gt.get(init));
            frames_scored.push(t);
            if e > REINIT_THRESHOLD {
                count += 1;
                init = t + REINIT_SKIP;
                t = init + 1;
            } else {
                t += 1;
            }
        }
        (count, frames_scored)
    };
    for (len, speed) in [(40, 3.0), (8, 3.0), (60, 0.5)] {
        let gt = drift(len, speed);
        let out = run_reinit(
            &pinned,
            &index_frames(len),
            &gt,
            REINIT_THRESHOLD,
            REINIT_SKIP,
            &opts,
        )
        .unwrap();
        let (count, scored) = simulate(&gt);
        let got: Vec<usize> = out.run.records.iter().map(|r| r.frame).collect();
        check(
            out.reinits == count && got == scored,
            &format!("reinit {len}x{speed}"),
        );
    }
    check(
        run_reinit(&pinned, &index_frames(40), &drift(40, 3.0), 20.0, 5, &opts)
            .unwrap()
            .reinits
            == 3,
        "reinit count 3",
    );
    check(
        run_reinit(&pinned, &index_frames(8), &drift(8, 3.0), 20.0, 5, &opts)
            .unwrap()
            .reinits
            == 1,
        "final-frame reinit",
    );

    // Projection residual over the DOF hierarchy.
    let mut r = rng(1010);
    let init = harness_box();
    let boxes: Vec<CornersBox> = (0..50)
        .map(|_| {
            let e = r.random_range(1.0..10.0);
            let b = displaced_box(&mut r, &init, e);
            shifted(&b, r.random_range(-20.0..20.0), r.random_range(-20.0..20.0))
        })
        .collect();
    let gt = GroundTruth::new(boxes).unwrap();
    let hierarchy = [
        SsmKind::Translation,
        SsmKind::Isometry,
        SsmKind::Similitude,
        SsmKind::Affine,
        SsmKind::Homography,
    ];
    let residuals: Vec<Vec<f64>> = hierarchy
        .iter()
        .map(|&k| {
            let p = project_ground_truth(&gt, k, &init).unwrap();
            gt.boxes()
                .iter()
                .zip(p.gt.boxes())
                .map(|(a, b)| alignment_error(a, b))
                .collect()
        })
        .collect();
    let mut violations = 0;
    for f in 0..gt.len() {
        for w in residuals.windows(2) {
            violations += usize::from(w[1][f] > w[0][f] + 1e-9);
        }
    }
    check(violations == 0, "projection monotone in DOF");
    check(
        residuals[4].iter().all(|&e| e < 1e-9),
        "homography projection exact",
    );
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "scripted SR/AUC/multi-init/reinit values exact; projection monotone on 50 frames"
                .into()
        } else {
            format!("mismatched: {}", failures.join(", "))
        },
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("seq.txt");
    std::fs::write(
        &script,
        "synthetic = yes\nframes = 12\nmotion = walk\namplitude = 1.5\ngain = 0.9 1.1\nnoise = 2\nseed = 5\n",
    )
    .unwrap();
    let outputs: Vec<_> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("out{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_regtrack"))
                .args([
                    "--sm",
                    "pffc",
                    "--am",
                    "ncc",
                    "--protocol",
                    "multi-init",
                    "--seed",
                    "9",
                ])
                .arg("--seq")
                .arg(&script)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(
                status.status.success(),
                "{}",
                String::from_utf8_lossy(&status.stderr)
            );
            ["frames.csv", "sr_curve.csv", "summary.txt"]
                .map(|f| std::fs::read(out.join(f)).unwrap())
        })
        .collect();
    let same = outputs[0] == outputs[1];
    let rows = outputs[0][0].iter().filter(|&&b| b == b'\n').count() - 1;
    verdict(
        same && rows > 0,
        format!(
            "two pffc multi-init runs, seed 9: {rows} frame rows, outputs {}",
            if same { "byte-identical" } else { "differ" }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("derivative correctness", derivative_correctness),
        ("self-Hessian identity", self_hessian_identity),
        ("stationarity", stationarity),
        ("SSIM algebra", ssim_algebra),
        ("ZNCC-NCC relation", zncc_ncc),
        ("SSM suite", ssm_suite),
        ("synthetic convergence", synthetic_convergence),
        ("basin-of-convergence ordering", basin_ordering),
        ("illumination robustness", illumination),
        ("evaluation protocol", evaluation_protocol),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
