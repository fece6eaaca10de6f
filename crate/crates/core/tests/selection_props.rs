use std::collections::BTreeSet;

use fabdecide_core::catalog::{AddOn, AddOnKind, Catalog, TechnologyNode};
use fabdecide_core::money::{Currency, Money, RateTable};
use fabdecide_core::selection::{
    filter_candidates, rank_criteria, select, BusinessCategory, CostInputs, DesignSpec, MarketOrientation,
    RawCriteria, SelectionStatus, Weights,
};
use fabdecide_core::validate_node;
use proptest::prelude::*;
use rust_decimal::Decimal;

fn usd(minor: i64) -> Money {
    Money::new(minor, Currency::USD)
}

fn node() -> impl Strategy<Value = TechnologyNode> {
    (
        (prop::sample::select(vec![12u32, 14, 28, 65, 130, 180, 350]), 5u32..=50, 0u32..=50, 1u32..=40),
        (1_000i64..5_000_000, 100_000i64..200_000_000, 10_000i64..1_000_000),
        (prop::sample::select(vec![150i64, 200, 300]), 1u32..=12, 1u32..=500, 1u32..=200),
        prop::collection::btree_set(prop::sample::select(AddOnKind::ALL.to_vec()), 0..3),
    )
        .prop_map(|((nm, core, cap, area), (mpw, mask, wafer), (dia, shuttles, fmax, samples), kinds)| {
            TechnologyNode {
                id: String::new(),
                foundry: "x".into(),
                node_nm: nm,
                core_voltage_v: Decimal::new(core.into(), 1),
                io_voltage_v: Decimal::new((core + 10).into(), 1),
                mim_cap_density_ff_um2: Decimal::new(cap.into(), 1),
                min_area_mm2: Decimal::new(area.into(), 1),
                mpw_price_per_mm2: usd(mpw),
                mask_cost: usd(mask),
                wafer_cost: usd(wafer),
                wafer_diameter_mm: dia.into(),
                shuttles_per_year: shuttles,
                f_max_hz: Decimal::from(fmax) * Decimal::from(10_000_000),
                samples_per_seat: samples,
                illustrative: true,
                addons: kinds.into_iter().map(|kind| AddOn { kind, surcharge_per_mm2: usd(5_000) }).collect(),
            }
        })
}

fn catalog() -> impl Strategy<Value = Catalog> {
    prop::collection::vec(node(), 1..8).prop_map(|mut nodes| {
        for (i, n) in nodes.iter_mut().enumerate() {
            n.id = format!("n{i:02}");
            assert!(validate_node(n).is_empty(), "generated node must be valid");
        }
        Catalog { version: "p".into(), currency_note: String::new(), nodes }
    })
}

fn spec() -> impl Strategy<Value = DesignSpec> {
    (
        1u32..=600,
        5u32..=60,
        0u32..=30,
        prop::collection::btree_set(prop::sample::select(AddOnKind::ALL.to_vec()), 0..2),
        1u32..=200,
        1u64..=2_000_000,
        prop::bool::ANY,
        prop::bool::ANY,
    )
        .prop_map(|(f, v, cap, addons, area, volume, cat2, perf)| DesignSpec {
            required_f_hz: Decimal::from(f) * Decimal::from(10_000_000),
            required_voltage_v: Decimal::new(v.into(), 1),
            required_cap_density_ff_um2: Decimal::new(cap.into(), 1),
            required_addons: addons.into_iter().collect(),
            die_area_mm2: Decimal::new(area.into(), 1),
            volume_forecast: volume,
            business_category: if cat2 { BusinessCategory::Cat2 } else { BusinessCategory::Cat1 },
            market_orientation: if perf {
                MarketOrientation::PerformanceOriented
            } else {
                MarketOrientation::CostOriented
            },
            dictated_node: None,
        })
}

fn weights() -> impl Strategy<Value = Weights> {
    prop::array::uniform5(0u32..=20).prop_filter("non-zero", |w| w.iter().sum::<u32>() > 0).prop_map(|w| {
        let total: u32 = w.iter().sum();
        let mut values = w.map(|x| Decimal::from(x) / Decimal::from(total));
        let drift = Decimal::ONE - values.iter().sum::<Decimal>();
        let largest = (0..5).max_by_key(|&i| w[i]).unwrap();
        values[largest] += drift;
        Weights::new(values).unwrap()
    })
}

fn raw_rows() -> impl Strategy<Value = Vec<(String, RawCriteria)>> {
    prop::collection::vec(
        (1i64..10_000_000, 0u32..40, 0u32..40, 1u32..500, 1u32..400),
        1..10,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (cost, cx, cap, f, wait))| {
                (
                    format!("t{i}"),
                    RawCriteria {
                        unit_cost_micro: cost.into(),
                        complexity_index: Decimal::new(cx.into(), 1),
                        cap_density: Decimal::new(cap.into(), 1),
                        f_max_hz: Decimal::from(f) * Decimal::from(1_000_000),
                        wait_days: Decimal::new(wait.into(), 1),
                    },
                )
            })
            .collect()
    })
}

fn ranking(c: &Catalog, s: &DesignSpec) -> Vec<(String, u32, f64)> {
    let report = select(c, s, None, &CostInputs::default(), &RateTable::default()).unwrap();
    report.candidates.into_iter().map(|c| (c.technology_id, c.rank, c.score)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn catalog_order_does_not_matter(c in catalog(), s in spec(), seed in any::<u64>()) {
        let mut shuffled = c.clone();
        let n = shuffled.nodes.len();
        for i in (1..n).rev() {
            shuffled.nodes.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        prop_assert_eq!(ranking(&c, &s), ranking(&shuffled, &s));
    }

    #[test]
    fn scaling_a_criterion_keeps_the_ranking(rows in raw_rows(), w in weights(), column in 0usize..5, k in 1u32..1000) {
        let factor = Decimal::new(k.into(), 1);
        let scaled: Vec<_> = rows.iter().map(|(id, r)| {
            let mut r = r.clone();
            match column {
                0 => r.unit_cost_micro *= factor,
                1 => r.complexity_index *= factor,
                2 => r.cap_density *= factor,
                3 => r.f_max_hz *= factor,
                _ => r.wait_days *= factor,
            }
            (id.clone(), r)
        }).collect();
        let a = rank_criteria(rows, &w).unwrap();
        let b = rank_criteria(scaled, &w).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.technology_id, &y.technology_id);
            prop_assert_eq!(x.rank, y.rank);
            prop_assert_eq!(x.score, y.score);
        }
    }

    #[test]
    fn scores_and_ranks_are_well_formed(rows in raw_rows(), w in weights()) {
        let n = rows.len();
        let ranked = rank_criteria(rows, &w).unwrap();
        prop_assert_eq!(ranked.iter().map(|c| c.rank).collect::<Vec<_>>(), (1..=n as u32).collect::<Vec<_>>());
        for pair in ranked.windows(2) {
            prop_assert!(pair[0].score > pair[1].score
                || (pair[0].score == pair[1].score && pair[0].technology_id < pair[1].technology_id));
        }
        for c in &ranked {
            let v = c.normalized;
            for x in [v.unit_cost, v.complexity, v.passives, v.f_max, v.time_to_market, c.score] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
    }

    #[test]
    fn tighter_requirements_never_add_candidates(c in catalog(), s in spec(), df in 0u32..200, dcap in 0u32..20, extra in prop::sample::select(AddOnKind::ALL.to_vec())) {
        let mut tighter = s.clone();
        tighter.required_f_hz += Decimal::from(df) * Decimal::from(10_000_000);
        tighter.required_cap_density_ff_um2 += Decimal::new(dcap.into(), 1);
        if !tighter.required_addons.contains(&extra) {
            tighter.required_addons.push(extra);
        }
        let loose: BTreeSet<_> = filter_candidates(&c, &s).into_iter().map(|n| n.id.clone()).collect();
        let tight: BTreeSet<_> = filter_candidates(&c, &tighter).into_iter().map(|n| n.id.clone()).collect();
        prop_assert!(tight.is_subset(&loose));
    }

    #[test]
    fn selection_is_deterministic(c in catalog(), s in spec()) {
        let run = || serde_json::to_string(&select(&c, &s, None, &CostInputs::default(), &RateTable::default()).unwrap()).unwrap();
        let first = run();
        prop_assert_eq!(&first, &run());
        let report = select(&c, &s, None, &CostInputs::default(), &RateTable::default()).unwrap();
        let feasible = filter_candidates(&c, &s).len();
        match report.status {
            SelectionStatus::Ranked => prop_assert_eq!(report.candidates.len(), feasible),
            SelectionStatus::NoFeasibleTechnology => prop_assert_eq!(feasible, 0),
            SelectionStatus::Dictated => prop_assert!(false),
        }
    }
}
