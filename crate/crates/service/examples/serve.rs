//! Starts the API on a local port with two demo users, drives one question
//! through `#reply` and publish over HTTP, then shuts down.
//!
//! Pass `--keep` to leave the server running at the printed address.

use std::future::IntoFuture;
use std::time::Duration;

use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

use draftdesk::Config;
use draftdesk_service::{router, AppState};

async fn call(addr: &str, method: &str, path: &str, token: &str, body: Option<Value>) -> (u16, Value) {
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let request = format!(
        "{method} {path} HTTP/1.1\r\nhost: {addr}\r\nauthorization: Bearer {token}\r\n\
         content-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    let mut stream = TcpStream::connect(addr).await.expect("connect");
    stream.write_all(request.as_bytes()).await.expect("write");
    let mut raw = String::new();
    stream.read_to_string(&mut raw).await.expect("read");
    let status = raw[9..12].parse().expect("status line");
    let json = raw.split_once("\r\n\r\n").map(|(_, b)| b).unwrap_or("");
    (status, serde_json::from_str(json).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = Config::from_toml(&format!(
        "[server]\ndata_dir = \"{}\"\n\
         [[users]]\nid = \"prof\"\nrole = \"instructor\"\ntoken = \"demo-prof\"\n\
         [[users]]\nid = \"sam\"\nrole = \"student\"\ntoken = \"demo-sam\"\n",
        dir.path().display()
    ))?;
    let state = AppState::open(&config, 0)?;
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?.to_string();
    let server = tokio::spawn(axum::serve(listener, router(state)).into_future());
    println!("listening on http://{addr}/v1 (tokens demo-prof, demo-sam)");

    let (_, thread) = call(
        &addr,
        "POST",
        "/v1/threads",
        "demo-sam",
        Some(json!({
            "title": "Push rejected",
            "body": "git push says the remote contains work I do not have locally",
        })),
    )
    .await;
    let id = &thread["thread_id"];
    let (status, outcome) = call(
        &addr,
        "POST",
        &format!("/v1/threads/{id}/comments?wait=true"),
        "demo-prof",
        Some(json!({
            "body": "#reply #anon suggest pulling first",
        })),
    )
    .await;
    println!("#reply -> {status} action={}", outcome["action"]);
    let draft = &outcome["draft"]["draft_id"];

    let (status, _) = call(&addr, "POST", &format!("/v1/drafts/{draft}/publish"), "demo-prof", None).await;
    println!("publish -> {status}");
    let (_, view) = call(&addr, "GET", &format!("/v1/threads/{id}"), "demo-sam", None).await;
    for c in view["comments"].as_array().into_iter().flatten() {
        println!(
            "student sees {}: {:.60}",
            c["display_name"],
            c["body"].as_str().unwrap_or("")
        );
    }
    let (_, usage) = call(&addr, "GET", "/v1/analytics/usage", "demo-prof", None).await;
    print!("{}", usage["table"].as_str().unwrap_or(""));

    if std::env::args().any(|a| a == "--keep") {
        server.await??;
    } else {
        tokio::time::sleep(Duration::from_millis(10)).await;
        server.abort();
    }
    Ok(())
}
