//! Helpers shared by integration targets.

use std::path::PathBuf;

use visionweb::backend::ExclusionVerdict;
use visionweb::cdp::{find_browser, BrowserProcess, BrowserSession, CdpError};
use visionweb::env::{BoundingBox, PageRef, TaskSpec, Viewport};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn within_one_px(a: BoundingBox, b: BoundingBox) -> bool {
    (a.x - b.x).abs() <= 1 && (a.y - b.y).abs() <= 1 && (a.w - b.w).abs() <= 1 && (a.h - b.h).abs() <= 1
}

fn snapshot_task(file: &str) -> TaskSpec {
    TaskSpec {
        task_id: file.into(),
        page: PageRef::Snapshot { path: fixture(file) },
        target_locator: "//button[@id='go']".into(),
        target_bbox: BoundingBox::new(100, 100, 50, 20),
        target_text: "Submit".into(),
        formulation_simplified: "Click on the element that displays Submit or conveys its meaning.".into(),
        formulation_humanlike: "Submit the form.".into(),
    }
}

/// (check, passed, detail)
pub type Check = (String, bool, String);

/// Runs the browser fixture checks. `None` when no browser is installed;
/// otherwise a list of (check, passed, detail).
pub fn cdp_fixture_checks() -> Option<Result<Vec<Check>, CdpError>> {
    find_browser()?;
    Some(run_checks())
}

fn run_checks() -> Result<Vec<(String, bool, String)>, CdpError> {
    let browser = BrowserProcess::launch(None)?;
    let vp = Viewport::default();
    let expected = BoundingBox::new(100, 100, 50, 20);
    let mut out = Vec::new();

    for ratio in [1.0, 2.0] {
        let mut s = BrowserSession::connect_with_ratio(browser.ws_endpoint(), vp, ratio)?;
        s.navigate(&fixture("button.html"))?;
        let shot = s.capture_screenshot()?;
        out.push((
            format!("screenshot is viewport-sized at ratio {ratio}"),
            (shot.width(), shot.height()) == (vp.width, vp.height),
            format!("{}x{}", shot.width(), shot.height()),
        ));
        let b = s.query_xpath_geometry("//button[@id='go']")?;
        out.push((
            format!("button geometry within 1 px at ratio {ratio}"),
            within_one_px(b, expected),
            format!("{b:?}"),
        ));
    }

    let mut s = BrowserSession::connect(browser.ws_endpoint(), vp)?;
    s.navigate(&fixture("button.html"))?;
    let missing = s.query_xpath_geometry("//a[@id='nothing']");
    out.push(("unmatched xpath is NotFound".into(), matches!(missing, Err(CdpError::NotFound(_))), format!("{missing:?}")));
    let hidden = s.query_xpath_geometry("//div[@id='gone']");
    out.push(("display:none element is ZeroArea".into(), matches!(hidden, Err(CdpError::ZeroArea(_))), format!("{hidden:?}")));

    for (file, want) in [
        ("button.html", ExclusionVerdict::Ok),
        ("overlay.html", ExclusionVerdict::Occluded),
        ("edited.html", ExclusionVerdict::Replaced),
    ] {
        s.navigate(&fixture(file))?;
        let got = s.detect_exclusion(&snapshot_task(file))?;
        out.push((format!("{file} -> {want:?}"), got == want, format!("{got:?}")));
    }
    Ok(out)
}
