/**
 * Browser entry point: load a .glb (``?src=...``), render it with three.js,
 * and wire scroll + pointer input to the view state.
 */
import * as THREE from "three";

import { parseGlb } from "./glb.js";
import { DEFAULT_GAINS, DEFAULT_LIMITS, ViewControl, cameraOffset } from "./view_state.js";

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

function numParam(name: string, fallback: number): number {
  const v = param(name);
  return v === null ? fallback : parseFloat(v);
}

async function start() {
  const src = param("src") ?? "photo.glb";
  const status = document.getElementById("status")!;
  status.textContent = `loading ${src} ...`;

  let blob: ArrayBuffer;
  try {
    const resp = await fetch(src);
    if (!resp.ok) throw new Error(`${resp.status} ${resp.statusText}`);
    blob = await resp.arrayBuffer();
  } catch (err) {
    status.textContent = `could not load ${src}: ${err}`;
    return;
  }
  const mesh = parseGlb(blob);

  const renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setSize(window.innerWidth, window.innerHeight);
  renderer.setPixelRatio(window.devicePixelRatio);
  document.body.appendChild(renderer.domElement);

  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x101014);

  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(mesh.positions, 3));
  geometry.setAttribute("uv", new THREE.BufferAttribute(mesh.uvs, 2));
  geometry.setIndex(new THREE.BufferAttribute(mesh.indices, 1));
  geometry.computeBoundingBox();

  const texBlob = new Blob([mesh.textureJpeg], { type: "image/jpeg" });
  const texture = new THREE.TextureLoader().load(URL.createObjectURL(texBlob));
  texture.colorSpace = THREE.SRGBColorSpace;
  texture.flipY = false; // glTF convention: v grows downward
  const material = new THREE.MeshBasicMaterial({
    map: texture,
    side: THREE.DoubleSide,
    transparent: true,
  });
  const photo = new THREE.Mesh(geometry, material);
  scene.add(photo);

  // Pivot at the mesh center; camera starts on the axis toward the origin.
  const box = geometry.boundingBox!;
  const pivot = box.getCenter(new THREE.Vector3());
  const span = box.getSize(new THREE.Vector3());
  const pivotDistance = Math.abs(pivot.z);

  // Framing border: four dark slabs just in front of the nearest geometry,
  // hiding the mesh boundary like a window frame.
  const frameZ = box.max.z + 0.02 * span.z + 1e-3;
  const frame = new THREE.Group();
  const frameMat = new THREE.MeshBasicMaterial({ color: 0x101014 });
  const fw = span.x * 0.08;
  const fh = span.y * 0.08;
  const bars: Array<[number, number, number, number]> = [
    [pivot.x, box.max.y - fh / 2, span.x, fh],
    [pivot.x, box.min.y + fh / 2, span.x, fh],
    [box.min.x + fw / 2, pivot.y, fw, span.y],
    [box.max.x - fw / 2, pivot.y, fw, span.y],
  ];
  for (const [cx, cy, w, h] of bars) {
    const bar = new THREE.Mesh(new THREE.PlaneGeometry(w, h), frameMat);
    bar.position.set(cx, cy, frameZ);
    frame.add(bar);
  }
  scene.add(frame);

  const camera = new THREE.PerspectiveCamera(
    60,
    window.innerWidth / window.innerHeight,
    0.01,
    100,
  );

  const limits = { ...DEFAULT_LIMITS };
  limits.dolly = 0.05 * pivotDistance; // 5% of the mean scene depth
  const gains = { ...DEFAULT_GAINS };
  gains.scrollPitch = numParam("k1", gains.scrollPitch);
  gains.scrollDolly = numParam("k2", gains.scrollDolly);
  gains.scrollYaw = numParam("k3", gains.scrollYaw);
  const control = new ViewControl(limits, gains);

  window.addEventListener("wheel", (e) => control.applyScroll(e.deltaY), {
    passive: true,
  });
  window.addEventListener("pointermove", (e) => {
    // Pointer position substitutes for gyro rotation: offset from center.
    if (e.buttons === 0) {
      const nx = (e.clientX / window.innerWidth - 0.5) * 400;
      const ny = (e.clientY / window.innerHeight - 0.5) * 400;
      control.pointerX = nx;
      control.pointerY = ny;
    }
  });
  window.addEventListener("dblclick", () => control.reset());
  window.addEventListener("resize", () => {
    camera.aspect = window.innerWidth / window.innerHeight;
    camera.updateProjectionMatrix();
    renderer.setSize(window.innerWidth, window.innerHeight);
  });

  status.textContent =
    `${mesh.indices.length / 3} triangles - scroll to rotate and dolly, ` +
    "move the pointer for parallax, double-click to recenter";

  function frameLoop() {
    const s = control.state();
    const off = cameraOffset(s, pivotDistance);
    camera.position.set(pivot.x + off.x, pivot.y + off.y, off.z);
    camera.lookAt(pivot);
    material.opacity = s.fade;
    renderer.render(scene, camera);
    requestAnimationFrame(frameLoop);
  }
  frameLoop();
}

start();
