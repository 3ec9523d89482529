use proptest::prelude::*;
use tempfile::TempDir;

use povmsim_core::bounds::{q_upper_bound_rank_one, WeightVector};
use povmsim_core::dilation::dilate_sub_povm;
use povmsim_core::generators::haar_random_povm;
use povmsim_core::io::{load_povm, read_json, save_povm, write_json, DilationFile, PovmFile};
use povmsim_core::partitions::random_partition;
use povmsim_core::povm::born;
use povmsim_core::scheme::build_scheme;
use povmsim_core::{QuantumState, Seed};

/// Dilating every sub-POVM, measuring, and relabelling reproduces `q·p` plus
/// the failure weight `1 − q`, also after a trip through files.
#[test]
fn dilated_scheme_reproduces_target() {
    let dir = TempDir::new().unwrap();
    let d = 3;
    let n = 9;
    let target = haar_random_povm(d, n, Seed(21)).unwrap();
    save_povm(dir.path().join("t.json"), &target).unwrap();
    let target = load_povm(dir.path().join("t.json")).unwrap();
    let scheme = build_scheme(&target, &random_partition(n, 3, Seed(22)).unwrap()).unwrap();
    write_json(dir.path().join("s.json"), &PovmFile::from_scheme(&scheme).unwrap()).unwrap();
    let section = read_json::<PovmFile>(dir.path().join("s.json")).unwrap().scheme.unwrap();
    assert_eq!(section.partition(n).unwrap(), scheme.partition);

    let files: Vec<DilationFile> = scheme
        .sub_povms
        .iter()
        .enumerate()
        .map(|(k, sub)| {
            let path = dir.path().join(format!("dil{k}.json"));
            write_json(&path, &DilationFile::from_dilation(&dilate_sub_povm(sub, true).unwrap())).unwrap();
            read_json(&path).unwrap()
        })
        .collect();

    let mut rng = Seed(23).rng();
    for _ in 0..20 {
        let rho = QuantumState::random_mixed(d, &mut rng);
        let mut law = vec![0.0; n + 1];
        for ((sub, file), p) in scheme.sub_povms.iter().zip(&files).zip(&scheme.mix_probs) {
            let g = file.grouped_born(&rho).unwrap();
            for (label, prob) in sub.labels().into_iter().zip(g) {
                law[label] += p * prob;
            }
        }
        let exact = born(&target, &rho).unwrap();
        for i in 0..n {
            assert!((law[i] - scheme.q_succ * exact[i]).abs() < 1e-10);
        }
        assert!((law[n] - (1.0 - scheme.q_succ)).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn q_is_sandwiched(d in 2usize..7, extra in 0usize..30, m_off in 0usize..6, seed in any::<u64>()) {
        let n = d + extra % (d * d - d + 1);
        let m = 2 + m_off % d;
        let target = haar_random_povm(d, n, Seed(seed)).unwrap();
        let scheme = build_scheme(&target, &random_partition(n, m, Seed(seed ^ 1)).unwrap()).unwrap();
        let bound = q_upper_bound_rank_one(&WeightVector::from_povm(&target).unwrap(), m.min(n)).unwrap();
        prop_assert!(scheme.q_succ > 0.0);
        prop_assert!(scheme.q_succ <= bound + 1e-10);
        prop_assert!((scheme.mix_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
