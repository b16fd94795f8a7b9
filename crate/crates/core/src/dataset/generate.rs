//! Procedural part-based shapes. All parameters are drawn uniformly from the
//! ranges written next to them; every shape stands on the floor `y = -0.95`
//! and fits inside `[-1, 1]³`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{PartKind, PartPrimitive, PartSet};

const FLOOR: f64 = -0.95;
const CEILING: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeClass {
    Chair,
    Table,
    Lamp,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 3] = [ShapeClass::Chair, ShapeClass::Table, ShapeClass::Lamp];

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Chair => "chair",
            ShapeClass::Table => "table",
            ShapeClass::Lamp => "lamp",
        }
    }

    fn salt(self) -> u64 {
        match self {
            ShapeClass::Chair => 0x0C4A_1200,
            ShapeClass::Table => 0x07AB_1E00,
            ShapeClass::Lamp => 0x01A3_B000,
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chair" => Ok(ShapeClass::Chair),
            "table" => Ok(ShapeClass::Table),
            "lamp" => Ok(ShapeClass::Lamp),
            other => Err(Error::Config(format!("unsupported shape class {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeRecord {
    pub id: String,
    pub class: ShapeClass,
    pub parts: Vec<PartPrimitive>,
    /// Slot of each entry of `parts`, ascending.
    pub slots: Vec<usize>,
    pub part_set: PartSet,
}

/// Deterministic shape for `(seed, class)` with its ground-truth part set.
pub fn generate_shape(seed: u64, class: ShapeClass, m: usize, d_model: usize) -> Result<ShapeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ class.salt());
    let layout = match class {
        ShapeClass::Chair => chair(&mut rng),
        ShapeClass::Table => table(&mut rng),
        ShapeClass::Lamp => lamp(&mut rng),
    };
    let (slots, parts): (Vec<usize>, Vec<PartPrimitive>) =
        layout.into_iter().enumerate().filter_map(|(i, p)| Some((i, p?))).unzip();
    let part_set = PartSet::from_slots(&slots, &parts, m, d_model)?;
    Ok(ShapeRecord {
        id: format!("{}_{seed:06}", class.name()),
        class,
        parts,
        slots,
        part_set,
    })
}

fn u(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn post(kind: PartKind, center: [f64; 3], radius: f64, half_height: f64) -> PartPrimitive {
    PartPrimitive::new(kind, center, [radius, half_height, radius], 0.0)
}

/// Each class keeps a part role in a fixed slot; `None` leaves it empty.
type Layout = Vec<Option<PartPrimitive>>;

/// Seat, backrest, 3 or 4 legs and optionally two armrests (5 to 8 parts).
/// Slots: seat, back, legs 2–5 (5 empty on a tripod), armrests 6–7.
fn chair(rng: &mut impl Rng) -> Layout {
    let hw = u(rng, 0.38, 0.5);
    let hd = u(rng, 0.36, 0.48);
    let ht = u(rng, 0.04, 0.07);
    let ys = u(rng, -0.2, 0.0);
    let seat_top = ys + ht;
    let back_h = u(rng, 0.28, ((CEILING - seat_top) / 2.0).min(0.45));
    let back_t = u(rng, 0.03, 0.06);
    let back_w = hw * u(rng, 0.85, 1.0);
    let mut parts = vec![
        Some(PartPrimitive::new(PartKind::Box, [0.0, ys, 0.0], [hw, ht, hd], 0.0)),
        Some(PartPrimitive::new(
            PartKind::Box,
            [0.0, seat_top + back_h, -hd + back_t],
            [back_w, back_h, back_t],
            0.0,
        )),
    ];
    let leg_kind = if rng.random_bool(0.5) {
        PartKind::Box
    } else {
        PartKind::Cylinder
    };
    let r = u(rng, 0.03, 0.06);
    let inset = u(rng, 0.02, 0.06);
    let leg_half = (ys - ht - FLOOR) / 2.0;
    let leg_y = FLOOR + leg_half;
    let (lx, lz) = (hw - r - inset, hd - r - inset);
    let spots: &[(f64, f64)] = if rng.random_bool(0.25) {
        &[(-1.0, 1.0), (1.0, 1.0), (0.0, -1.0)]
    } else {
        &[(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
    };
    for &(sx, sz) in spots {
        parts.push(Some(post(leg_kind, [sx * lx, leg_y, sz * lz], r, leg_half)));
    }
    parts.resize(6, None);
    if rng.random_bool(0.4) {
        let arm_y = seat_top + u(rng, 0.18, 0.26);
        let arm_len = hd * u(rng, 0.6, 0.85);
        for sx in [-1.0, 1.0] {
            parts.push(Some(PartPrimitive::new(
                PartKind::Box,
                [sx * (hw - 0.03), arm_y, 0.05],
                [0.03, 0.03, arm_len],
                0.0,
            )));
        }
    }
    parts
}

/// Rectangular top on four legs, or a round top on a pedestal and foot.
/// Slots: top, legs 1–4, pedestal 5, foot 6.
fn table(rng: &mut impl Rng) -> Layout {
    let yt = u(rng, 0.1, 0.35);
    let ht = u(rng, 0.03, 0.06);
    let leg_half = (yt - ht - FLOOR) / 2.0;
    let leg_y = FLOOR + leg_half;
    if rng.random_bool(0.35) {
        let top_r = u(rng, 0.5, 0.8);
        let pole_r = u(rng, 0.05, 0.09);
        let foot_r = u(rng, 0.25, 0.4);
        let foot_h = u(rng, 0.02, 0.04);
        vec![
            Some(PartPrimitive::new(PartKind::Cylinder, [0.0, yt, 0.0], [top_r, ht, top_r], 0.0)),
            None,
            None,
            None,
            None,
            Some(post(PartKind::Cylinder, [0.0, leg_y, 0.0], pole_r, leg_half)),
            Some(post(PartKind::Cylinder, [0.0, FLOOR + foot_h, 0.0], foot_r, foot_h)),
        ]
    } else {
        let hw = u(rng, 0.6, 0.95);
        let hd = u(rng, 0.4, 0.75);
        let kind = if rng.random_bool(0.5) {
            PartKind::Box
        } else {
            PartKind::Cylinder
        };
        let r = u(rng, 0.04, 0.07);
        let inset = u(rng, 0.02, 0.1);
        let (lx, lz) = (hw - r - inset, hd - r - inset);
        let mut parts = vec![Some(PartPrimitive::new(PartKind::Box, [0.0, yt, 0.0], [hw, ht, hd], 0.0))];
        for (sx, sz) in [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            parts.push(Some(post(kind, [sx * lx, leg_y, sz * lz], r, leg_half)));
        }
        parts
    }
}

/// Base disk, pole and a cylindrical or ellipsoidal shade.
fn lamp(rng: &mut impl Rng) -> Layout {
    let base_r = u(rng, 0.2, 0.35);
    let base_h = u(rng, 0.03, 0.06);
    let pole_r = u(rng, 0.02, 0.04);
    let shade_h = u(rng, 0.15, 0.3);
    let shade_r = u(rng, 0.25, 0.4);
    let pole_top = u(rng, 0.2, CEILING - 1.5 * shade_h);
    let base_top = FLOOR + 2.0 * base_h;
    let pole_half = (pole_top - base_top) / 2.0;
    let shade_kind = if rng.random_bool(0.5) {
        PartKind::Cylinder
    } else {
        PartKind::Ellipsoid
    };
    vec![
        Some(post(PartKind::Cylinder, [0.0, FLOOR + base_h, 0.0], base_r, base_h)),
        Some(post(PartKind::Cylinder, [0.0, base_top + pole_half, 0.0], pole_r, pole_half)),
        Some(PartPrimitive::new(
            shade_kind,
            [0.0, pole_top + 0.5 * shade_h, 0.0],
            [shade_r, shade_h, shade_r],
            0.0,
        )),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        for class in ShapeClass::ALL {
            assert_eq!(
                generate_shape(17, class, 12, 32).unwrap(),
                generate_shape(17, class, 12, 32).unwrap()
            );
        }
        assert_ne!(
            generate_shape(1, ShapeClass::Chair, 8, 32).unwrap().parts,
            generate_shape(2, ShapeClass::Chair, 8, 32).unwrap().parts
        );
    }

    #[test]
    fn chair_part_counts() {
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..300 {
            let n = generate_shape(seed, ShapeClass::Chair, 8, 32).unwrap().parts.len();
            assert!((5..=8).contains(&n));
            seen.insert(n);
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn chair_slots_keep_their_roles() {
        for seed in 0..200 {
            let rec = generate_shape(seed, ShapeClass::Chair, 8, 32).unwrap();
            assert_eq!(&rec.slots[..5], &[0, 1, 2, 3, 4]);
            // legs share one kind; armrests come in pairs in 6 and 7
            let leg = rec.parts[2].kind;
            for (&slot, p) in rec.slots.iter().zip(&rec.parts) {
                if (2..6).contains(&slot) {
                    assert_eq!(p.kind, leg);
                }
            }
            assert_eq!(rec.slots.contains(&6), rec.slots.contains(&7));
            assert_eq!(rec.part_set.present_slots(), rec.slots);
        }
    }

    #[test]
    fn shapes_fit_the_unit_cube() {
        for class in ShapeClass::ALL {
            for seed in 0..1000 {
                let rec = generate_shape(seed, class, 12, 32).unwrap();
                for p in &rec.parts {
                    p.validate().unwrap();
                    let (lo, hi) = p.aabb();
                    for i in 0..3 {
                        assert!(lo[i] >= -1.0 && hi[i] <= 1.0, "{class} {seed}: {p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn ground_truth_rows_decode_to_generator_parts() {
        let rec = generate_shape(3, ShapeClass::Table, 8, 32).unwrap();
        let decoded: Vec<_> = rec.part_set.parts().unwrap().into_iter().map(|(_, p)| p).collect();
        assert_eq!(decoded, rec.parts);
        assert_eq!(rec.part_set.present_slots().len(), rec.parts.len());
    }

    #[test]
    fn unknown_class_is_a_config_error() {
        assert!(matches!("plane".parse::<ShapeClass>(), Err(Error::Config(_))));
    }
}
