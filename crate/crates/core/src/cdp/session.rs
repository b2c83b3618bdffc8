use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::launch::BrowserProcess;
use super::transport::Connection;
use super::CdpError;
use crate::backend::{text_matches, BackendError, ExclusionVerdict, PageBackend};
use crate::env::{round_half_up, BoundingBox, PageRef, TaskSpec, Viewport};
use crate::raster::Raster;

pub const DEFAULT_NAVIGATION_TIMEOUT: Duration = Duration::from_secs(15);

const LOAD_EVENT: &str = "Page.loadEventFired";

/// One page target driven over its own WebSocket.
pub struct BrowserSession {
    endpoint: String,
    target_id: String,
    session_id: String,
    device_pixel_ratio: f64,
    viewport: Viewport,
    navigation_timeout: Duration,
    conn: Connection,
}

/// What the page reports about a task's target.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ExclusionProbe {
    pub found: bool,
    #[serde(default)]
    pub text: String,
    /// Top-most element at the target center is the target or inside it.
    #[serde(default)]
    pub hit: bool,
}

/// Checks are applied in order: resolution, text, then occlusion.
pub fn classify_exclusion(probe: &ExclusionProbe, target_text: &str) -> ExclusionVerdict {
    if !probe.found {
        ExclusionVerdict::NotFound
    } else if !text_matches(&probe.text, target_text) {
        ExclusionVerdict::Replaced
    } else if !probe.hit {
        ExclusionVerdict::Occluded
    } else {
        ExclusionVerdict::Ok
    }
}

/// Snaps a fractional client rect to whole CSS pixels: edges are rounded
/// half-up independently, so adjacent boxes stay adjacent. `None` when the
/// rect has no area.
pub fn rect_to_bbox(x: f64, y: f64, w: f64, h: f64) -> Option<BoundingBox> {
    if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
        return None;
    }
    let x0 = round_half_up(x);
    let y0 = round_half_up(y);
    let x1 = round_half_up(x + w).max(x0 + 1);
    let y1 = round_half_up(y + h).max(y0 + 1);
    Some(BoundingBox::new(x0 as i32, y0 as i32, (x1 - x0) as i32, (y1 - y0) as i32))
}

fn file_url(path: &Path) -> String {
    let mut url = String::from("file://");
    for c in path.to_string_lossy().chars() {
        match c {
            ' ' => url.push_str("%20"),
            '#' => url.push_str("%23"),
            '?' => url.push_str("%3F"),
            '%' => url.push_str("%25"),
            c => url.push(c),
        }
    }
    url
}

fn js_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn node_js(xpath: &str) -> String {
    format!(
        "const n = document.evaluate({}, document, null, XPathResult.FIRST_ORDERED_NODE_TYPE, null).singleNodeValue;\n\
         const el = n && (n.nodeType === Node.ELEMENT_NODE ? n : n.parentElement);",
        js_string(xpath)
    )
}

fn geometry_js(xpath: &str) -> String {
    format!(
        "(() => {{ {}\n\
         if (!el) return {{found: false}};\n\
         const r = el.getBoundingClientRect();\n\
         return {{found: true, x: r.left, y: r.top, w: r.width, h: r.height}}; }})()",
        node_js(xpath)
    )
}

fn probe_js(xpath: &str, center: Option<(f64, f64)>) -> String {
    let c = match center {
        Some((x, y)) => format!("[{x}, {y}]"),
        None => "null".to_string(),
    };
    format!(
        "(() => {{ {}\n\
         if (!el) return {{found: false}};\n\
         const parts = [el.innerText, el.value, el.getAttribute('aria-label'), el.getAttribute('alt')];\n\
         const text = parts.filter(s => typeof s === 'string' && s.length > 0).join(' ');\n\
         const c = {c};\n\
         let hit = false;\n\
         if (c) {{ const top = document.elementFromPoint(c[0], c[1]); hit = top !== null && (top === el || el.contains(top)); }}\n\
         return {{found: true, text, hit}}; }})()",
        node_js(xpath)
    )
}

#[derive(Deserialize)]
struct RectReply {
    found: bool,
    #[serde(default)]
    x: f64,
    #[serde(default)]
    y: f64,
    #[serde(default)]
    w: f64,
    #[serde(default)]
    h: f64,
}

/// Accepts a `ws://` browser endpoint as is; for `http://host:port`, asks
/// `/json/version` for it.
fn resolve_endpoint(endpoint: &str) -> Result<String, CdpError> {
    if endpoint.starts_with("ws://") || endpoint.starts_with("wss://") {
        return Ok(endpoint.to_string());
    }
    let fail = |reason: String| CdpError::ConnectFailed {
        endpoint: endpoint.to_string(),
        reason,
    };
    let url = format!("{}/json/version", endpoint.trim_end_matches('/'));
    let info: Value = ureq::get(&url)
        .call()
        .map_err(|e| fail(e.to_string()))?
        .body_mut()
        .read_json()
        .map_err(|e| fail(e.to_string()))?;
    info.get("webSocketDebuggerUrl")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| fail("no webSocketDebuggerUrl in /json/version".into()))
}

fn str_field(v: &Value, key: &str, method: &str) -> Result<String, CdpError> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CdpError::Protocol(format!("{method}: missing {key}")))
}

impl BrowserSession {
    pub fn connect(endpoint: &str, viewport: Viewport) -> Result<Self, CdpError> {
        Self::connect_with_ratio(endpoint, viewport, 1.0)
    }

    /// Creates and attaches a fresh page target and pins its metrics.
    pub fn connect_with_ratio(endpoint: &str, viewport: Viewport, device_pixel_ratio: f64) -> Result<Self, CdpError> {
        if !(device_pixel_ratio > 0.0 && device_pixel_ratio.is_finite()) {
            return Err(CdpError::Protocol(format!("invalid device pixel ratio {device_pixel_ratio}")));
        }
        let ws = resolve_endpoint(endpoint)?;
        let mut conn = Connection::open(&ws)?;
        let created = conn.call(None, "Target.createTarget", json!({ "url": "about:blank" }))?;
        let target_id = str_field(&created, "targetId", "Target.createTarget")?;
        let attached = conn.call(
            None,
            "Target.attachToTarget",
            json!({ "targetId": target_id, "flatten": true }),
        )?;
        let session_id = str_field(&attached, "sessionId", "Target.attachToTarget")?;
        let mut s = Self {
            endpoint: ws,
            target_id,
            session_id,
            device_pixel_ratio,
            viewport,
            navigation_timeout: DEFAULT_NAVIGATION_TIMEOUT,
            conn,
        };
        s.call("Page.enable", json!({}))?;
        s.call(
            "Emulation.setDeviceMetricsOverride",
            json!({
                "width": viewport.width,
                "height": viewport.height,
                "deviceScaleFactor": device_pixel_ratio,
                "mobile": false,
            }),
        )?;
        Ok(s)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    pub fn device_pixel_ratio(&self) -> f64 {
        self.device_pixel_ratio
    }

    pub fn viewport(&self) -> Viewport {
        self.viewport
    }

    pub fn set_navigation_timeout(&mut self, timeout: Duration) {
        self.navigation_timeout = timeout;
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, CdpError> {
        let sid = self.session_id.clone();
        self.conn.call(Some(&sid), method, params)
    }

    /// Loads a snapshot file and waits for the load event.
    pub fn navigate(&mut self, snapshot: &Path) -> Result<(), CdpError> {
        let path = snapshot.display().to_string();
        let abs = std::fs::canonicalize(snapshot).map_err(|e| CdpError::LoadFailed {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        self.conn.watch(LOAD_EVENT);
        let result = self.navigate_inner(&abs, &path);
        self.conn.unwatch(LOAD_EVENT);
        result
    }

    fn navigate_inner(&mut self, abs: &Path, path: &str) -> Result<(), CdpError> {
        let reply = self.call("Page.navigate", json!({ "url": file_url(abs) }))?;
        if let Some(err) = reply.get("errorText").and_then(Value::as_str) {
            return Err(CdpError::LoadFailed {
                path: path.to_string(),
                reason: err.to_string(),
            });
        }
        let sid = self.session_id.clone();
        match self.conn.wait_event(Some(&sid), LOAD_EVENT, self.navigation_timeout)? {
            Some(_) => Ok(()),
            None => Err(CdpError::NavigationTimeout {
                path: path.to_string(),
                secs: self.navigation_timeout.as_secs(),
            }),
        }
    }

    /// Viewport-sized page raster in CSS pixels, without the cursor.
    pub fn capture_screenshot(&mut self) -> Result<Raster, CdpError> {
        let vp = self.viewport;
        let reply = self.call(
            "Page.captureScreenshot",
            json!({
                "format": "png",
                "fromSurface": true,
                "clip": {
                    "x": 0, "y": 0,
                    "width": vp.width, "height": vp.height,
                    "scale": 1.0 / self.device_pixel_ratio,
                },
            }),
        )?;
        let data = str_field(&reply, "data", "Page.captureScreenshot")?;
        let png = base64::engine::general_purpose::STANDARD
            .decode(data.as_bytes())
            .map_err(|e| CdpError::Protocol(format!("screenshot is not base64: {e}")))?;
        let raster = Raster::from_png(&png).map_err(|e| CdpError::Protocol(format!("screenshot: {e}")))?;
        if raster.width() == vp.width && raster.height() == vp.height {
            Ok(raster)
        } else {
            Ok(raster.resize_nearest(vp.width, vp.height))
        }
    }

    fn evaluate(&mut self, expression: String) -> Result<Value, CdpError> {
        let reply = self.call(
            "Runtime.evaluate",
            json!({ "expression": expression, "returnByValue": true }),
        )?;
        if let Some(ex) = reply.get("exceptionDetails") {
            let text = ex
                .pointer("/exception/description")
                .or_else(|| ex.get("text"))
                .and_then(Value::as_str)
                .unwrap_or("exception");
            return Err(CdpError::Protocol(format!("evaluation failed: {text}")));
        }
        reply
            .pointer("/result/value")
            .cloned()
            .ok_or_else(|| CdpError::Protocol("Runtime.evaluate: no value".into()))
    }

    /// Client rect of the first node matching `xpath` (text nodes resolve to
    /// their parent element), in viewport CSS pixels.
    pub fn query_xpath_geometry(&mut self, xpath: &str) -> Result<BoundingBox, CdpError> {
        let v = self.evaluate(geometry_js(xpath))?;
        let r: RectReply =
            serde_json::from_value(v).map_err(|e| CdpError::Protocol(format!("geometry reply: {e}")))?;
        if !r.found {
            return Err(CdpError::NotFound(xpath.to_string()));
        }
        rect_to_bbox(r.x, r.y, r.w, r.h).ok_or_else(|| CdpError::ZeroArea(xpath.to_string()))
    }

    /// Runs the exclusion checks against the live page. The occlusion probe
    /// uses the center of the live geometry; a target without area can
    /// never be hit and so ends up `Occluded` unless its text already differs.
    pub fn detect_exclusion(&mut self, task: &TaskSpec) -> Result<ExclusionVerdict, CdpError> {
        let center = match self.query_xpath_geometry(&task.target_locator) {
            Ok(b) => Some(b.center()),
            Err(CdpError::NotFound(_)) => return Ok(ExclusionVerdict::NotFound),
            Err(CdpError::ZeroArea(_)) => None,
            Err(e) => return Err(e),
        };
        let v = self.evaluate(probe_js(&task.target_locator, center))?;
        let probe: ExclusionProbe =
            serde_json::from_value(v).map_err(|e| CdpError::Protocol(format!("probe reply: {e}")))?;
        Ok(classify_exclusion(&probe, &task.target_text))
    }
}

impl Drop for BrowserSession {
    fn drop(&mut self) {
        self.conn.command_timeout = Duration::from_secs(2);
        let target = self.target_id.clone();
        let _ = self.conn.call(None, "Target.closeTarget", json!({ "targetId": target }));
    }
}

/// [`PageBackend`] over a browser session. Tasks must reference snapshot files.
pub struct CdpBackend {
    session: BrowserSession,
    loaded: bool,
    // Declared after the session so the page closes before the browser dies.
    _browser: Option<BrowserProcess>,
}

impl CdpBackend {
    pub fn new(session: BrowserSession) -> Self {
        Self {
            session,
            loaded: false,
            _browser: None,
        }
    }

    /// Starts a private headless browser and connects to it.
    pub fn launch(viewport: Viewport) -> Result<Self, CdpError> {
        let browser = BrowserProcess::launch(None)?;
        let session = BrowserSession::connect(browser.ws_endpoint(), viewport)?;
        Ok(Self {
            session,
            loaded: false,
            _browser: Some(browser),
        })
    }

    pub fn session(&mut self) -> &mut BrowserSession {
        &mut self.session
    }
}

impl PageBackend for CdpBackend {
    fn viewport(&self) -> Viewport {
        self.session.viewport()
    }

    fn load(&mut self, task: &TaskSpec) -> Result<ExclusionVerdict, BackendError> {
        self.loaded = false;
        let PageRef::Snapshot { path } = &task.page else {
            return Err(BackendError::UnsupportedPage(format!(
                "{}: synthetic layouts need the synthetic backend",
                task.task_id
            )));
        };
        self.session.navigate(path)?;
        self.loaded = true;
        Ok(self.session.detect_exclusion(task)?)
    }

    fn screenshot(&mut self) -> Result<Raster, BackendError> {
        if !self.loaded {
            return Err(BackendError::NoPageLoaded);
        }
        Ok(self.session.capture_screenshot()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdp::transport::mock_server;

    fn probe(found: bool, text: &str, hit: bool) -> ExclusionProbe {
        ExclusionProbe {
            found,
            text: text.into(),
            hit,
        }
    }

    #[test]
    fn classification_order() {
        assert_eq!(classify_exclusion(&probe(false, "", false), "Go"), ExclusionVerdict::NotFound);
        assert_eq!(classify_exclusion(&probe(true, "Stop", false), "Go"), ExclusionVerdict::Replaced);
        assert_eq!(classify_exclusion(&probe(true, "Stop", true), "Go"), ExclusionVerdict::Replaced);
        assert_eq!(classify_exclusion(&probe(true, " go  NOW ", false), "Go now"), ExclusionVerdict::Occluded);
        assert_eq!(classify_exclusion(&probe(true, "Let's\n GO", true), "go"), ExclusionVerdict::Ok);
    }

    #[test]
    fn rect_snapping() {
        assert_eq!(rect_to_bbox(100.0, 100.0, 50.0, 20.0), Some(BoundingBox::new(100, 100, 50, 20)));
        assert_eq!(rect_to_bbox(99.5, 100.4, 50.0, 20.0), Some(BoundingBox::new(100, 100, 50, 20)));
        assert_eq!(rect_to_bbox(10.0, 10.0, 0.0, 5.0), None);
        assert_eq!(rect_to_bbox(10.0, 10.0, 5.0, -1.0), None);
        assert_eq!(rect_to_bbox(10.0, 10.0, 0.2, 0.2), Some(BoundingBox::new(10, 10, 1, 1)));
        assert_eq!(rect_to_bbox(f64::NAN, 0.0, 1.0, 1.0), None);
    }

    #[test]
    fn file_urls_escape_reserved_characters() {
        assert_eq!(file_url(Path::new("/tmp/a b#c.html")), "file:///tmp/a%20b%23c.html");
    }

    #[test]
    fn scripts_embed_xpath_as_string_literal() {
        let js = geometry_js(r#"//button[text()="Go"]"#);
        assert!(js.contains(r#""//button[text()=\"Go\"]""#));
        assert!(probe_js("//a", None).contains("const c = null;"));
        assert!(probe_js("//a", Some((125.0, 110.5))).contains("[125, 110.5]"));
    }

    fn png_of(w: u32, h: u32) -> String {
        let r = Raster::filled(w, h, [10, 20, 30, 255]);
        base64::engine::general_purpose::STANDARD.encode(r.to_png().unwrap())
    }

    /// Minimal stand-in for a browser: canned replies keyed on method and
    /// on markers in the evaluated script.
    fn fake_browser() -> String {
        let (url, _h) = mock_server(|f| {
            let id = f["id"].clone();
            let ok = |result: Value| json!({ "id": id, "result": result });
            let method = f["method"].as_str().unwrap_or_default();
            let p = &f["params"];
            match method {
                "Target.createTarget" => vec![ok(json!({"targetId": "T1"}))],
                "Target.attachToTarget" => {
                    assert_eq!(p["flatten"], true);
                    vec![ok(json!({"sessionId": "S1"}))]
                }
                "Page.navigate" => {
                    assert_eq!(f["sessionId"], "S1");
                    let target = p["url"].as_str().unwrap();
                    if target.contains("broken") {
                        vec![ok(json!({"frameId": "F", "errorText": "net::ERR_ABORTED"}))]
                    } else if target.contains("slow") {
                        vec![ok(json!({"frameId": "F"}))]
                    } else {
                        vec![
                            json!({"method": "Page.frameStartedLoading", "sessionId": "S1", "params": {}}),
                            ok(json!({"frameId": "F"})),
                            json!({"method": LOAD_EVENT, "sessionId": "OTHER", "params": {}}),
                            json!({"method": LOAD_EVENT, "sessionId": "S1", "params": {"timestamp": 2.0}}),
                        ]
                    }
                }
                "Page.captureScreenshot" => {
                    let scale = p["clip"]["scale"].as_f64().unwrap();
                    // the fake page always renders at ratio 2
                    let w = (p["clip"]["width"].as_f64().unwrap() * 2.0 * scale) as u32;
                    let h = (p["clip"]["height"].as_f64().unwrap() * 2.0 * scale) as u32;
                    vec![ok(json!({"data": png_of(w + 1, h)}))]
                }
                "Runtime.evaluate" => {
                    let e = p["expression"].as_str().unwrap();
                    let value = if e.contains("throw-me") {
                        return vec![ok(json!({"result": {"type": "object"}, "exceptionDetails": {"text": "Uncaught"}}))];
                    } else if e.contains("missing") {
                        json!({"found": false})
                    } else if e.contains("getBoundingClientRect") {
                        if e.contains("hidden") {
                            json!({"found": true, "x": 0, "y": 0, "w": 0, "h": 0})
                        } else {
                            json!({"found": true, "x": 100.2, "y": 99.8, "w": 50, "h": 20})
                        }
                    } else if e.contains("overlay") {
                        json!({"found": true, "text": "Submit", "hit": false})
                    } else if e.contains("edited") {
                        json!({"found": true, "text": "Cancel", "hit": true})
                    } else if e.contains("hidden") {
                        json!({"found": true, "text": "Submit", "hit": false})
                    } else {
                        assert!(e.contains("[125, 110]"), "probe must use the live center: {e}");
                        json!({"found": true, "text": "  SUBMIT\n", "hit": true})
                    };
                    vec![ok(json!({"result": {"type": "object", "value": value}}))]
                }
                _ => vec![ok(json!({}))],
            }
        });
        url
    }

    fn task(xpath: &str) -> TaskSpec {
        TaskSpec {
            task_id: "t".into(),
            page: PageRef::Snapshot {
                path: std::env::temp_dir(),
            },
            target_locator: xpath.into(),
            target_bbox: BoundingBox::new(100, 100, 50, 20),
            target_text: "Submit".into(),
            formulation_simplified: String::new(),
            formulation_humanlike: String::new(),
        }
    }

    #[test]
    fn session_against_fake_browser() {
        let vp = Viewport::new(320, 200).unwrap();
        let mut s = BrowserSession::connect_with_ratio(&fake_browser(), vp, 2.0).unwrap();
        assert_eq!(s.target_id(), "T1");
        let dir = tempfile::tempdir().unwrap();
        let page = dir.path().join("page.html");
        std::fs::write(&page, "<html></html>").unwrap();
        s.navigate(&page).unwrap();

        let shot = s.capture_screenshot().unwrap();
        assert_eq!((shot.width(), shot.height()), (320, 200));

        assert_eq!(s.query_xpath_geometry("//button").unwrap(), BoundingBox::new(100, 100, 50, 20));
        assert!(matches!(s.query_xpath_geometry("//missing"), Err(CdpError::NotFound(_))));
        assert!(matches!(s.query_xpath_geometry("//hidden"), Err(CdpError::ZeroArea(_))));
        assert!(matches!(s.query_xpath_geometry("//throw-me"), Err(CdpError::Protocol(_))));

        assert_eq!(s.detect_exclusion(&task("//button")).unwrap(), ExclusionVerdict::Ok);
        assert_eq!(s.detect_exclusion(&task("//overlay")).unwrap(), ExclusionVerdict::Occluded);
        assert_eq!(s.detect_exclusion(&task("//edited")).unwrap(), ExclusionVerdict::Replaced);
        assert_eq!(s.detect_exclusion(&task("//missing")).unwrap(), ExclusionVerdict::NotFound);
        assert_eq!(s.detect_exclusion(&task("//hidden")).unwrap(), ExclusionVerdict::Occluded);
    }

    #[test]
    fn navigation_failures() {
        let vp = Viewport::new(320, 200).unwrap();
        let mut s = BrowserSession::connect(&fake_browser(), vp).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            s.navigate(&dir.path().join("absent.html")),
            Err(CdpError::LoadFailed { .. })
        ));
        let broken = dir.path().join("broken.html");
        std::fs::write(&broken, "").unwrap();
        assert!(matches!(s.navigate(&broken), Err(CdpError::LoadFailed { .. })));
        let slow = dir.path().join("slow.html");
        std::fs::write(&slow, "").unwrap();
        s.set_navigation_timeout(Duration::from_millis(200));
        assert!(matches!(s.navigate(&slow), Err(CdpError::NavigationTimeout { .. })));
    }

    #[test]
    fn backend_requires_snapshot_pages_and_a_load() {
        let vp = Viewport::new(320, 200).unwrap();
        let mut b = CdpBackend::new(BrowserSession::connect(&fake_browser(), vp).unwrap());
        assert!(matches!(b.screenshot(), Err(BackendError::NoPageLoaded)));
        let mut t = task("//button");
        t.page = PageRef::Synthetic {
            layout: crate::synthetic::PageLayout {
                viewport: vp,
                background: [255, 255, 255, 255],
                elements: vec![],
            },
        };
        assert!(matches!(b.load(&t), Err(BackendError::UnsupportedPage(_))));
    }

    #[test]
    fn http_endpoint_resolves_through_json_version() {
        use std::io::{Read, Write};
        let ws = fake_browser();
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let http = format!("http://{}", listener.local_addr().unwrap());
        std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 1024];
            let n = stream.read(&mut buf).unwrap();
            assert!(String::from_utf8_lossy(&buf[..n]).starts_with("GET /json/version "));
            let body = json!({ "webSocketDebuggerUrl": ws }).to_string();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
        });
        let s = BrowserSession::connect(&http, Viewport::new(320, 200).unwrap()).unwrap();
        assert!(s.endpoint().starts_with("ws://"));
    }
}
