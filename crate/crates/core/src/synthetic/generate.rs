use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layout::{occlusion_check, LayoutElement, PageLayout};
use crate::env::{hit_test, BoundingBox, CursorState, PageRef, TaskSpec, Viewport};
use crate::raster::Rgba;
use crate::rng;

const MAX_ATTEMPTS: usize = 64;
const MAX_CURSOR_TRIES: usize = 256;
pub const MIN_TARGET_SIDE: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("could not satisfy generation constraints for task {index} after {attempts} attempts")]
    GenerationFailed { index: u64, attempts: usize },
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanU {
    pub min: u32,
    pub max: u32,
}

impl SpanU {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }
}

/// Inclusive real range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanF {
    pub min: f64,
    pub max: f64,
}

impl SpanF {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// How distractors painted above the target may overlap it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// No distractor above the target intersects it.
    Forbid,
    /// Distractors above the target may overlap it but never cover its center.
    AllowOffCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    #[serde(default)]
    pub viewport: Viewport,
    /// Total elements on the page, target included.
    pub element_count: SpanU,
    pub target_width: SpanU,
    pub target_height: SpanU,
    pub overlap: OverlapPolicy,
    /// Distance from the initial cursor to the target center, in pixels.
    pub cursor_distance: SpanF,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            viewport: Viewport::default(),
            element_count: SpanU::new(4, 12),
            target_width: SpanU::new(40, 220),
            target_height: SpanU::new(16, 60),
            overlap: OverlapPolicy::AllowOffCenter,
            cursor_distance: SpanF::new(0.0, 600.0),
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidSpec(m.to_string()));
        let vp = self.viewport;
        if vp.width == 0 || vp.height == 0 {
            return bad("viewport must be non-empty");
        }
        if self.element_count.min == 0 || self.element_count.min > self.element_count.max {
            return bad("element_count must satisfy 1 <= min <= max");
        }
        for (name, s, limit) in [
            ("target_width", self.target_width, vp.width),
            ("target_height", self.target_height, vp.height),
        ] {
            if s.min > s.max {
                return bad(&format!("{name} range is empty"));
            }
            if s.min < MIN_TARGET_SIDE {
                return bad(&format!("{name} minimum is below {MIN_TARGET_SIDE} px"));
            }
            if s.max > limit {
                return bad(&format!("{name} maximum exceeds the viewport"));
            }
        }
        let d = self.cursor_distance;
        if !(d.min.is_finite() && d.max.is_finite()) || d.min < 0.0 || d.min > d.max {
            return bad("cursor_distance must satisfy 0 <= min <= max");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTask {
    pub task: TaskSpec,
    pub layout: PageLayout,
    pub initial_cursor: CursorState,
}

struct LabelEntry {
    label: &'static str,
    intent: Option<&'static str>,
}

const fn l(label: &'static str, intent: Option<&'static str>) -> LabelEntry {
    LabelEntry { label, intent }
}

const LABELS: &[LabelEntry] = &[
    l("English", Some("Switch the website's language to English.")),
    l("Deutsch", Some("Switch the website's language to German.")),
    l("Sign in", Some("Log into my account.")),
    l("Register", Some("Create a new account on this site.")),
    l("Search", Some("Start a search on this page.")),
    l("Cart", Some("Show me what is in my shopping cart.")),
    l("Checkout", Some("Proceed to pay for my order.")),
    l("Contact", Some("Find a way to get in touch with the site owners.")),
    l("About us", Some("Learn more about the company behind this site.")),
    l("Help", Some("I need some help using this website.")),
    l("Settings", Some("Open the settings.")),
    l("Log out", Some("Sign me out of the site.")),
    l("Subscribe", Some("Sign up for the newsletter.")),
    l("Download", Some("Get the file onto my computer.")),
    l("Next", Some("Go to the next page.")),
    l("Previous", Some("Go back to the previous page.")),
    l("Home", Some("Return to the main page.")),
    l("Accept", Some("Agree to the terms shown here.")),
    l("Reject", Some("Decline the request on the page.")),
    l("Pricing", Some("How much does this service cost?")),
    l("Blog", Some("Read the latest articles.")),
    l("Careers", Some("Look for job openings at this company.")),
    l("FAQ", Some("Show answers to common questions.")),
    l("Share", Some("Send this page to a friend.")),
    l("Print", Some("Print this page.")),
    l("Menu", Some("Open the navigation menu.")),
    l("Close", Some("Dismiss this window.")),
    l("Submit", Some("Send the form.")),
    l("Cancel", Some("Abort what I am doing here.")),
    l("Play", Some("Start the video.")),
    l("Events", None),
    l("Docs", None),
    l("Store", None),
    l("News", None),
    l("Privacy", None),
    l("Terms", None),
    l("Support", None),
    l("Gallery", None),
    l("Profile", None),
    l("Orders", None),
    l("Wishlist", None),
    l("Sale", None),
    l("Offers", None),
    l("Team", None),
    l("Partners", None),
    l("Status", None),
    l("Forum", None),
    l("Archive", None),
];

const HUMANLIKE_TEMPLATES: &[&str] = &[
    "Open the {label} section.",
    "Take me to {label}.",
    "I want to see the {label} page.",
    "Go to {label}, please.",
    "Find {label} and open it.",
    "Show me {label}.",
];

const FILLS: &[Rgba] = &[
    [52, 120, 246, 255],
    [234, 67, 53, 255],
    [251, 188, 5, 255],
    [52, 168, 83, 255],
    [103, 58, 183, 255],
    [0, 150, 136, 255],
    [255, 112, 67, 255],
    [96, 125, 139, 255],
    [233, 236, 239, 255],
    [33, 37, 41, 255],
];

const BACKGROUNDS: &[Rgba] = &[
    [255, 255, 255, 255],
    [248, 249, 250, 255],
    [241, 243, 244, 255],
    [250, 247, 240, 255],
];

pub fn simplified_formulation(label: &str) -> String {
    format!("Click on the element that displays {label} or conveys its meaning.")
}

fn humanlike_formulation(entry: &LabelEntry, rng: &mut ChaCha8Rng) -> String {
    if let Some(intent) = entry.intent {
        return intent.to_string();
    }
    let t = HUMANLIKE_TEMPLATES[rng.random_range(0..HUMANLIKE_TEMPLATES.len())];
    t.replace("{label}", entry.label)
}

fn draw_rect(rng: &mut ChaCha8Rng, spec: &GenSpec) -> BoundingBox {
    let vp = spec.viewport;
    let w = rng.random_range(spec.target_width.min..=spec.target_width.max);
    let h = rng.random_range(spec.target_height.min..=spec.target_height.max);
    let x = rng.random_range(0..=vp.width - w);
    let y = rng.random_range(0..=vp.height - h);
    BoundingBox::new(x as i32, y as i32, w as i32, h as i32)
}

pub(crate) fn place_cursor(rng: &mut ChaCha8Rng, spec: &GenSpec, center: (f64, f64)) -> Option<CursorState> {
    let d = spec.cursor_distance;
    for _ in 0..MAX_CURSOR_TRIES {
        let dist = if d.max > d.min {
            d.min + (d.max - d.min) * rng::unit_f64(rng)
        } else {
            d.min
        };
        let theta = std::f64::consts::TAU * rng::unit_f64(rng);
        let x = center.0 + dist * theta.cos();
        let y = center.1 + dist * theta.sin();
        if spec.viewport.contains(x, y) {
            return Some(CursorState::new(x, y));
        }
    }
    None
}

fn try_generate(
    rng: &mut ChaCha8Rng,
    spec: &GenSpec,
    index: u64,
) -> Option<GeneratedTask> {
    let n = rng.random_range(spec.element_count.min..=spec.element_count.max) as usize;
    let target_rect = draw_rect(rng, spec);
    let target_z = rng.random_range(0..n);
    let center = target_rect.center();

    // pick n distinct labels; the first one is the target's
    let mut pool: Vec<usize> = (0..LABELS.len()).collect();
    let mut picks = Vec::with_capacity(n);
    for _ in 0..n.min(LABELS.len()) {
        let k = rng.random_range(0..pool.len());
        picks.push(pool.swap_remove(k));
    }
    let target_entry = &LABELS[picks[0]];

    let mut elements = Vec::with_capacity(n);
    let mut distractor_no = 1;
    for z in 0..n {
        let id = format!("el-{z}");
        if z == target_z {
            elements.push(LayoutElement {
                id,
                rect: target_rect,
                fill: FILLS[rng.random_range(0..FILLS.len())],
                label: target_entry.label.to_string(),
                clickable: true,
                parent: None,
            });
            continue;
        }
        let label = match picks.get(distractor_no) {
            Some(&i) => LABELS[i].label.to_string(),
            None => format!("Item {distractor_no}"),
        };
        distractor_no += 1;
        let mut placed = None;
        for _ in 0..32 {
            let rect = draw_rect(rng, spec);
            let ok = if z < target_z {
                true
            } else {
                match spec.overlap {
                    OverlapPolicy::Forbid => !rect.intersects(&target_rect),
                    OverlapPolicy::AllowOffCenter => !hit_test(&rect, center),
                }
            };
            if ok {
                placed = Some(rect);
                break;
            }
        }
        let rect = placed?;
        elements.push(LayoutElement {
            id,
            rect,
            fill: FILLS[rng.random_range(0..FILLS.len())],
            label,
            clickable: rng.random_bool(0.7),
            parent: None,
        });
    }

    let layout = PageLayout {
        viewport: spec.viewport,
        background: BACKGROUNDS[rng.random_range(0..BACKGROUNDS.len())],
        elements,
    };
    let target_id = format!("el-{target_z}");
    if occlusion_check(&layout, &target_id).ok()? {
        return None;
    }
    let initial_cursor = place_cursor(rng, spec, center)?;
    let humanlike = humanlike_formulation(target_entry, rng);
    let task = TaskSpec {
        task_id: format!("syn-{:016x}-{index:06}", spec.seed),
        page: PageRef::Synthetic {
            layout: layout.clone(),
        },
        target_locator: target_id,
        target_bbox: target_rect,
        target_text: target_entry.label.to_string(),
        formulation_simplified: simplified_formulation(target_entry.label),
        formulation_humanlike: humanlike,
    };
    Some(GeneratedTask {
        task,
        layout,
        initial_cursor,
    })
}

/// Generates task `index` of the set described by `spec`. Pure in `(spec, index)`.
pub fn generate_task(spec: &GenSpec, index: u64) -> Result<GeneratedTask, GenError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[0x7461_736b, index]);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(t) = try_generate(&mut rng, spec, index) {
            return Ok(t);
        }
    }
    Err(GenError::GenerationFailed {
        index,
        attempts: MAX_ATTEMPTS,
    })
}

pub fn generate_tasks(spec: &GenSpec, count: u64) -> Result<Vec<GeneratedTask>, GenError> {
    (0..count).map(|i| generate_task(spec, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_index() {
        let spec = GenSpec {
            seed: 11,
            ..GenSpec::default()
        };
        assert_eq!(generate_task(&spec, 3).unwrap(), generate_task(&spec, 3).unwrap());
        assert_ne!(
            generate_task(&spec, 3).unwrap().task,
            generate_task(&spec, 4).unwrap().task
        );
    }

    #[test]
    fn zero_distance_puts_cursor_at_center() {
        let spec = GenSpec {
            seed: 5,
            cursor_distance: SpanF::new(0.0, 0.0),
            ..GenSpec::default()
        };
        for i in 0..50 {
            let g = generate_task(&spec, i).unwrap();
            assert_eq!(g.initial_cursor.point(), g.task.target_bbox.center());
            assert!(hit_test(&g.task.target_bbox, g.initial_cursor.point()));
        }
    }

    #[test]
    fn formulation_template() {
        let g = generate_task(&GenSpec::default(), 0).unwrap();
        assert_eq!(
            g.task.formulation_simplified,
            format!("Click on the element that displays {} or conveys its meaning.", g.task.target_text)
        );
        assert!(!g.task.formulation_humanlike.is_empty());
    }

    #[test]
    fn forbid_policy_keeps_target_clear() {
        let spec = GenSpec {
            seed: 9,
            overlap: OverlapPolicy::Forbid,
            ..GenSpec::default()
        };
        for i in 0..100 {
            let g = generate_task(&spec, i).unwrap();
            let pos = g.layout.elements.iter().position(|e| e.id == g.task.target_locator).unwrap();
            for e in &g.layout.elements[pos + 1..] {
                assert!(!e.rect.intersects(&g.task.target_bbox));
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let s = GenSpec {
            target_width: SpanU::new(4, 20),
            ..GenSpec::default()
        };
        assert!(matches!(generate_task(&s, 0), Err(GenError::InvalidSpec(_))));
        let s = GenSpec {
            cursor_distance: SpanF::new(5.0, 1.0),
            ..GenSpec::default()
        };
        assert!(s.validate().is_err());
        let s = GenSpec {
            element_count: SpanU::new(0, 3),
            ..GenSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn impossible_distance_fails() {
        let s = GenSpec {
            cursor_distance: SpanF::new(10_000.0, 20_000.0),
            ..GenSpec::default()
        };
        assert!(matches!(generate_task(&s, 0), Err(GenError::GenerationFailed { .. })));
    }

    #[test]
    fn layout_is_valid_and_target_unique() {
        let spec = GenSpec {
            element_count: SpanU::new(30, 60),
            ..GenSpec::default()
        };
        for i in 0..20 {
            let g = generate_task(&spec, i).unwrap();
            g.layout.validate().unwrap();
            let same_label = g
                .layout
                .elements
                .iter()
                .filter(|e| e.label == g.task.target_text)
                .count();
            assert_eq!(same_label, 1);
        }
    }
}
