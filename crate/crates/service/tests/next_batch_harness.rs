use curate_service::{CreateSession, GeneratorSettings, PreferenceRequest, Session};

/// After one candidate beats every other candidate of its batch, the next
/// batch should revisit its neighbourhood.
#[test]
fn strong_preference_pulls_the_next_batch() {
    let radius = 0.5;
    let mut hits = 0;
    let runs = 50;
    for seed in 0..runs {
        let req = CreateSession {
            problem: "ackley2d".into(),
            kernel: None,
            sigma: None,
            m: 5,
            seed,
            generator: Some(GeneratorSettings { n: Some(10), iterations: Some(40), sigma2_dis: None }),
        };
        let mut s = Session::create(format!("{seed:032x}"), req).unwrap();
        let batch = s.batches()[0].clone();
        let space = s.problem().space.clone();
        // the candidate farthest from the quantitative optimum
        let winner = *batch
            .iter()
            .max_by(|a, b| {
                let na = space.point(**a).coords().unwrap().iter().map(|x| x * x).sum::<f64>();
                let nb = space.point(**b).coords().unwrap().iter().map(|x| x * x).sum::<f64>();
                na.total_cmp(&nb)
            })
            .unwrap();
        let wp = space.point(winner);
        for &l in &batch {
            if space.point(l).squared_distance(&wp).unwrap() > 0.0 {
                s.submit(PreferenceRequest { winner, loser: l }).unwrap();
            }
        }
        let next = s.next_batch().unwrap();
        assert_eq!(next.candidates.len(), 5);
        if next.candidates.iter().any(|c| c.action.squared_distance(&wp).unwrap().sqrt() <= radius) {
            hits += 1;
        }
    }
    let rate = hits as f64 / runs as f64;
    assert!(rate >= 0.8, "neighbourhood hit rate {rate}");
}
