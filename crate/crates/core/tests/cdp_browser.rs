mod common;

#[test]
fn fixtures_in_a_real_browser() {
    let Some(result) = common::cdp_fixture_checks() else {
        eprintln!("skipping: no Chromium-family browser found (set CHROME_PATH)");
        return;
    };
    let checks = result.expect("browser session");
    for (name, ok, detail) in &checks {
        eprintln!("{} {name}: {detail}", if *ok { "ok  " } else { "FAIL" });
        assert!(ok, "{name}: {detail}");
    }
}
