use std::io::ErrorKind;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::CdpError;

/// A protocol event kept because someone asked to wait for it.
#[derive(Debug, Clone)]
struct Event {
    method: String,
    session: Option<String>,
    params: Value,
}

/// JSON-over-WebSocket command channel. Ids increase monotonically; events
/// nobody is watching are dropped as they arrive.
pub(crate) struct Connection {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    next_id: u64,
    pub(crate) command_timeout: Duration,
    watched: Vec<String>,
    events: Vec<Event>,
}

fn proto(e: impl std::fmt::Display) -> CdpError {
    CdpError::Protocol(e.to_string())
}

impl Connection {
    pub(crate) fn open(ws_url: &str) -> Result<Self, CdpError> {
        let (ws, _) = tungstenite::connect(ws_url).map_err(|e| CdpError::ConnectFailed {
            endpoint: ws_url.to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            ws,
            next_id: 1,
            command_timeout: Duration::from_secs(30),
            watched: Vec::new(),
            events: Vec::new(),
        })
    }

    /// Starts buffering events named `method` until they are consumed.
    pub(crate) fn watch(&mut self, method: &str) {
        if !self.watched.iter().any(|m| m == method) {
            self.watched.push(method.to_string());
        }
    }

    pub(crate) fn unwatch(&mut self, method: &str) {
        self.watched.retain(|m| m != method);
        self.events.retain(|e| e.method != method);
    }

    fn set_deadline(&mut self, deadline: Instant) -> Result<(), CdpError> {
        let left = deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1));
        if let MaybeTlsStream::Plain(s) = self.ws.get_mut() {
            s.set_read_timeout(Some(left)).map_err(proto)?;
        }
        Ok(())
    }

    /// Reads one JSON frame; `None` on deadline expiry.
    fn read_frame(&mut self, deadline: Instant) -> Result<Option<Value>, CdpError> {
        loop {
            if Instant::now() >= deadline {
                return Ok(None);
            }
            self.set_deadline(deadline)?;
            let msg = match self.ws.read() {
                Ok(m) => m,
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    return Ok(None)
                }
                Err(e) => return Err(proto(e)),
            };
            let text = match msg {
                Message::Text(t) => t.to_string(),
                Message::Binary(b) => String::from_utf8(b.to_vec()).map_err(proto)?,
                Message::Close(_) => return Err(CdpError::Protocol("connection closed".into())),
                _ => continue,
            };
            return serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| CdpError::Protocol(format!("malformed frame: {e}")));
        }
    }

    fn stash_if_watched(&mut self, frame: &Value) {
        let Some(method) = frame.get("method").and_then(Value::as_str) else {
            return;
        };
        if self.watched.iter().any(|m| m == method) {
            self.events.push(Event {
                method: method.to_string(),
                session: frame.get("sessionId").and_then(Value::as_str).map(str::to_string),
                params: frame.get("params").cloned().unwrap_or(Value::Null),
            });
        }
    }

    /// Sends `{id, method, params[, sessionId]}` and blocks for the matching response.
    pub(crate) fn call(&mut self, session: Option<&str>, method: &str, params: Value) -> Result<Value, CdpError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut frame = json!({ "id": id, "method": method, "params": params });
        if let Some(s) = session {
            frame["sessionId"] = json!(s);
        }
        self.ws.send(Message::text(frame.to_string())).map_err(proto)?;
        let deadline = Instant::now() + self.command_timeout;
        loop {
            let Some(reply) = self.read_frame(deadline)? else {
                return Err(CdpError::Timeout { method: method.to_string() });
            };
            match reply.get("id").and_then(Value::as_u64) {
                Some(rid) if rid == id => {
                    if let Some(err) = reply.get("error") {
                        let msg = err.get("message").and_then(Value::as_str).unwrap_or("unknown error");
                        return Err(CdpError::Protocol(format!("{method}: {msg}")));
                    }
                    return reply
                        .get("result")
                        .cloned()
                        .ok_or_else(|| CdpError::Protocol(format!("{method}: response without result")));
                }
                Some(_) => continue, // stale response to an abandoned command
                None => self.stash_if_watched(&reply),
            }
        }
    }

    /// Waits for a watched event on `session`, consuming it. `None` on timeout.
    pub(crate) fn wait_event(
        &mut self,
        session: Option<&str>,
        method: &str,
        timeout: Duration,
    ) -> Result<Option<Value>, CdpError> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(i) = self
                .events
                .iter()
                .position(|e| e.method == method && e.session.as_deref() == session)
            {
                return Ok(Some(self.events.remove(i).params));
            }
            match self.read_frame(deadline)? {
                Some(frame) => self.stash_if_watched(&frame),
                None => return Ok(None),
            }
        }
    }
}

#[cfg(test)]
/// Accepts one client and answers each command with `respond(frame)`,
/// which returns the frames to send back in order.
pub(crate) fn mock_server<F>(respond: F) -> (String, std::thread::JoinHandle<()>)
where
    F: Fn(&Value) -> Vec<Value> + Send + 'static,
{
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("ws://{}/devtools/browser/mock", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut ws = tungstenite::accept(stream).unwrap();
        while let Ok(msg) = ws.read() {
            let Message::Text(t) = msg else { continue };
            let frame: Value = serde_json::from_str(&t).unwrap();
            for out in respond(&frame) {
                // a string starting with "RAW:" is sent verbatim, unencoded
                let text = match out.as_str().and_then(|t| t.strip_prefix("RAW:")) {
                    Some(raw) => raw.to_string(),
                    None => out.to_string(),
                };
                if ws.send(Message::text(text)).is_err() {
                    return;
                }
            }
        }
    });
    (url, handle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn responses_are_matched_by_id_and_events_discarded() {
        let (url, _h) = mock_server(|f| {
            let id = f["id"].clone();
            vec![
                json!({"method": "Noise.event", "params": {}}),
                json!({"id": 999, "result": {"stale": true}}),
                json!({"id": id, "result": {"echo": f["method"], "session": f.get("sessionId")}}),
            ]
        });
        let mut c = Connection::open(&url).unwrap();
        let r = c.call(None, "A.first", json!({})).unwrap();
        assert_eq!(r["echo"], "A.first");
        let r = c.call(Some("S1"), "B.second", json!({"k": 1})).unwrap();
        assert_eq!(r["echo"], "B.second");
        assert_eq!(r["session"], "S1");
        assert!(c.events.is_empty());
        assert_eq!(c.next_id, 3);
    }

    #[test]
    fn error_frames_become_protocol_errors() {
        let (url, _h) = mock_server(|f| vec![json!({"id": f["id"], "error": {"code": -32000, "message": "boom"}})]);
        let mut c = Connection::open(&url).unwrap();
        match c.call(None, "X.y", json!({})) {
            Err(CdpError::Protocol(m)) => assert!(m.contains("boom")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_frame_is_protocol_error() {
        let (url, _h) = mock_server(|_| vec![json!("RAW:{not json")]);
        let mut c = Connection::open(&url).unwrap();
        match c.call(None, "X.y", json!({})) {
            Err(CdpError::Protocol(m)) => assert!(m.contains("malformed")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn silence_times_out() {
        let (url, _h) = mock_server(|_| vec![json!({"method": "Only.events"})]);
        let mut c = Connection::open(&url).unwrap();
        c.command_timeout = Duration::from_millis(200);
        assert!(matches!(c.call(None, "X.y", json!({})), Err(CdpError::Timeout { .. })));
    }

    #[test]
    fn watched_event_before_response_is_kept() {
        let (url, _h) = mock_server(|f| {
            vec![
                json!({"method": "Page.loadEventFired", "sessionId": "S", "params": {"timestamp": 1.0}}),
                json!({"id": f["id"], "result": {}}),
            ]
        });
        let mut c = Connection::open(&url).unwrap();
        c.watch("Page.loadEventFired");
        c.call(Some("S"), "Page.navigate", json!({})).unwrap();
        let ev = c.wait_event(Some("S"), "Page.loadEventFired", Duration::from_millis(200)).unwrap();
        assert_eq!(ev.unwrap()["timestamp"], 1.0);
        assert!(c
            .wait_event(Some("S"), "Page.loadEventFired", Duration::from_millis(50))
            .unwrap()
            .is_none());
    }

    #[test]
    fn unreachable_endpoint() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        assert!(matches!(
            Connection::open(&format!("ws://127.0.0.1:{port}/")),
            Err(CdpError::ConnectFailed { .. })
        ));
    }
}
