use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use super::CdpError;

const CANDIDATES: &[&str] = &[
    "chromium",
    "chromium-browser",
    "google-chrome",
    "google-chrome-stable",
    "chrome",
    "chrome-headless-shell",
    "headless_shell",
];

const STARTUP_TIMEOUT: Duration = Duration::from_secs(20);

static PROFILE_COUNTER: AtomicU64 = AtomicU64::new(0);

/// `CHROME_PATH` if set and present, else the first Chromium-family binary on `PATH`.
pub fn find_browser() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("CHROME_PATH").map(PathBuf::from) {
        if p.is_file() {
            return Some(p);
        }
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .flat_map(|dir| CANDIDATES.iter().map(move |name| dir.join(name)))
        .find(|p| p.is_file())
}

/// A headless browser owned by this process; killed on drop.
pub struct BrowserProcess {
    child: Child,
    ws_endpoint: String,
    profile: PathBuf,
}

impl BrowserProcess {
    /// Spawns `binary` (or [`find_browser`]) with an ephemeral debugging port
    /// and a throwaway profile, and waits for it to announce its endpoint.
    pub fn launch(binary: Option<&Path>) -> Result<Self, CdpError> {
        let binary = match binary {
            Some(b) => b.to_path_buf(),
            None => find_browser().ok_or_else(|| CdpError::Launch("no Chromium-family browser found".into()))?,
        };
        let profile = std::env::temp_dir().join(format!(
            "visionweb-profile-{}-{}",
            std::process::id(),
            PROFILE_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut child = Command::new(&binary)
            .args([
                "--headless",
                "--remote-debugging-port=0",
                "--no-first-run",
                "--no-default-browser-check",
                "--no-sandbox",
                "--disable-gpu",
                "--hide-scrollbars",
                "--mute-audio",
                "--disable-extensions",
                "--font-render-hinting=none",
            ])
            .arg(format!("--user-data-dir={}", profile.display()))
            .arg("about:blank")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CdpError::Launch(format!("{}: {e}", binary.display())))?;

        let stderr = child.stderr.take().expect("stderr is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut sent = false;
            // keep draining so the browser never blocks on a full pipe
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                if !sent {
                    if let Some(ws) = line.strip_prefix("DevTools listening on ") {
                        let _ = tx.send(ws.trim().to_string());
                        sent = true;
                    }
                }
            }
        });
        let mut process = Self {
            child,
            ws_endpoint: String::new(),
            profile,
        };
        match rx.recv_timeout(STARTUP_TIMEOUT) {
            Ok(ws) => {
                process.ws_endpoint = ws;
                Ok(process)
            }
            Err(_) => Err(CdpError::Launch(format!(
                "{} did not report a DevTools endpoint",
                binary.display()
            ))),
        }
    }

    pub fn ws_endpoint(&self) -> &str {
        &self.ws_endpoint
    }
}

impl Drop for BrowserProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        let _ = std::fs::remove_dir_all(&self.profile);
    }
}
