// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Helpers for driving the router in-process.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use tropic_core::synthetic::PlantedDiscussion;

const BOUNDARY: &str = "tropic-test-boundary";

/// A `multipart/form-data` body with one part per `(name, content)`.
pub fn multipart(parts: &[(&str, &str)]) -> (String, Vec<u8>) {
    let mut body = Vec::new();
    for (name, content) in parts {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}.csv\"\r\n\
                 Content-Type: text/csv\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(content.as_bytes());
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={BOUNDARY}"), body)
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.body))
        })
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).expect("UTF-8 body")
    }
}

pub async fn send(app: &Router, request: Request<Body>) -> Reply {
    let response = app.clone().oneshot(request).await.expect("router is infallible");
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn delete(app: &Router, uri: &str) -> Reply {
    send(app, Request::delete(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> Reply {
    let request = Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, request).await
}

pub async fn upload(app: &Router, parts: &[(&str, &str)]) -> Reply {
    let (content_type, body) = multipart(parts);
    let request = Request::builder()
        .method(Method::POST)
        .uri("/api/jobs")
        .header("content-type", content_type)
        .body(Body::from(body))
        .unwrap();
    send(app, request).await
}

/// Polls the status endpoint until the job leaves the running phases.
pub async fn wait_finished(app: &Router, id: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let status = get(app, &format!("/api/jobs/{id}")).await.json();
        let phase = status["phase"].as_str().unwrap().to_string();
        if phase == "done" || phase == "failed" {
            return status;
        }
        assert!(Instant::now() < deadline, "job {id} stuck in {phase}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// Uploads and waits for `done`, returning the job id.
pub async fn create_done(app: &Router, parts: &[(&str, &str)]) -> String {
    let reply = upload(app, parts).await;
    assert_eq!(reply.status, StatusCode::ACCEPTED, "{}", reply.text());
    let id = reply.json()["id"].as_str().unwrap().to_string();
    let status = wait_finished(app, &id).await;
    assert_eq!(status["phase"], "done", "{status}");
    id
}

pub fn edges_csv(planted: &PlantedDiscussion) -> String {
    let mut out = b"url,user_id\n".to_vec();
    planted.edge_list.write_to(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

pub fn base_knowledge_csv(planted: &PlantedDiscussion) -> String {
    let mut out = b"domain,score\n".to_vec();
    planted.base_knowledge.write_to(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}
