use std::collections::BTreeMap;

use font8x8::{UnicodeFonts, BASIC_FONTS};

use super::layout::PageLayout;
use crate::env::BoundingBox;
use crate::raster::{Raster, Rgba};

pub type GeometryTable = BTreeMap<String, BoundingBox>;

const GLYPH: i64 = 8;

fn text_color(fill: Rgba) -> Rgba {
    let luma = 299 * fill[0] as u32 + 587 * fill[1] as u32 + 114 * fill[2] as u32;
    if luma > 140_000 {
        [0, 0, 0, 255]
    } else {
        [255, 255, 255, 255]
    }
}

fn draw_label(raster: &mut Raster, rect: &BoundingBox, label: &str, color: Rgba) {
    let chars: Vec<char> = label.chars().collect();
    let text_w = chars.len() as i64 * GLYPH;
    let x0 = rect.x as i64 + (rect.w as i64 - text_w) / 2;
    let y0 = rect.y as i64 + (rect.h as i64 - GLYPH) / 2;
    let (cx0, cy0) = (rect.x as i64, rect.y as i64);
    let (cx1, cy1) = (rect.right() as i64, rect.bottom() as i64);
    for (i, ch) in chars.iter().enumerate() {
        let glyph = BASIC_FONTS.get(*ch).or_else(|| BASIC_FONTS.get('?')).unwrap_or([0; 8]);
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                let px = x0 + i as i64 * GLYPH + col;
                let py = y0 + row as i64;
                if px >= cx0 && px < cx1 && py >= cy0 && py < cy1 {
                    raster.blend(px, py, color);
                }
            }
        }
    }
}

/// Paints the background, then each element in list order as a filled
/// rectangle with its label centered (8x8 bitmap font, clipped to the rect).
pub fn render_page(layout: &PageLayout) -> (Raster, GeometryTable) {
    let vp = layout.viewport;
    let mut raster = Raster::filled(vp.width, vp.height, layout.background);
    let mut geometry = GeometryTable::new();
    for e in &layout.elements {
        let r = e.rect;
        raster.fill_rect(r.x as i64, r.y as i64, r.w as i64, r.h as i64, e.fill);
        draw_label(&mut raster, &r, &e.label, text_color(e.fill));
        geometry.insert(e.id.clone(), r);
    }
    (raster, geometry)
}
